//! FCIDUMP reading and writing, plus analytic model Hamiltonians.
//!
//! Integrals use the chemists' convention `(pq|rs)`. Indices are 0-based in
//! memory and 1-based in files; the conversion happens only in this module.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for treating two values of the same integral slot as equal.
const CONFLICT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FcidumpError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: orbital index {index} outside [0, {norb}]")]
    Range { line: usize, index: i64, norb: usize },
    #[error("line {line}: NELEC={nelec} and MS2={ms2} give a non-integer spin split")]
    Inconsistent { line: usize, nelec: i64, ms2: i64 },
    #[error("line {line}: integral ({p} {q} {r} {s}) redefined as {new} (was {old})")]
    Conflict { line: usize, p: usize, q: usize, r: usize, s: usize, old: f64, new: f64 },
    #[error("invalid Hamiltonian: {0}")]
    Invalid(String),
}

/// Real spin-restricted electronic Hamiltonian over `norb` spatial orbitals.
///
/// The two-electron table is stored densely with every symmetry-equivalent
/// slot filled, so lookups never have to canonicalize indices.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionHamiltonian {
    norb: usize,
    n_alpha: usize,
    n_beta: usize,
    e_core: f64,
    h: Vec<f64>,
    g: Vec<f64>,
}

/// The eight index permutations that leave a real `(pq|rs)` invariant.
pub fn symmetry_class(p: usize, q: usize, r: usize, s: usize) -> [(usize, usize, usize, usize); 8] {
    [(p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r), (r, s, p, q), (s, r, p, q), (r, s, q, p), (s, r, q, p)]
}

impl FermionHamiltonian {
    /// Builds a Hamiltonian from dense tables, checking the index symmetries exactly.
    ///
    /// `h` is row-major `M×M`, `g` is row-major `M×M×M×M`.
    pub fn new(
        norb: usize,
        n_alpha: usize,
        n_beta: usize,
        e_core: f64,
        h: Vec<f64>,
        g: Vec<f64>,
    ) -> Result<Self, FcidumpError> {
        if norb == 0 || norb > 64 {
            return Err(FcidumpError::Invalid(format!("norb={norb} must be in 1..=64")));
        }
        if n_alpha > norb || n_beta > norb {
            return Err(FcidumpError::Invalid(format!("electron counts ({n_alpha}, {n_beta}) exceed norb={norb}")));
        }
        if h.len() != norb * norb || g.len() != norb.pow(4) {
            return Err(FcidumpError::Invalid("integral table has the wrong size".into()));
        }
        let ham = Self { norb, n_alpha, n_beta, e_core, h, g };
        for p in 0..norb {
            for q in 0..norb {
                if ham.h(p, q) != ham.h(q, p) {
                    return Err(FcidumpError::Invalid(format!("h[{p}][{q}] != h[{q}][{p}]")));
                }
                for r in 0..norb {
                    for s in 0..norb {
                        let v = ham.g(p, q, r, s);
                        for (a, b, c, d) in symmetry_class(p, q, r, s) {
                            if ham.g(a, b, c, d) != v {
                                return Err(FcidumpError::Invalid(format!("g({p}{q}|{r}{s}) breaks 8-fold symmetry")));
                            }
                        }
                    }
                }
            }
        }
        Ok(ham)
    }

    /// All integrals zero.
    pub fn zero(norb: usize, n_alpha: usize, n_beta: usize) -> Result<Self, FcidumpError> {
        Self::new(norb, n_alpha, n_beta, 0.0, vec![0.0; norb * norb], vec![0.0; norb.pow(4)])
    }

    pub fn norb(&self) -> usize {
        self.norb
    }

    pub fn n_alpha(&self) -> usize {
        self.n_alpha
    }

    pub fn n_beta(&self) -> usize {
        self.n_beta
    }

    pub fn e_core(&self) -> f64 {
        self.e_core
    }

    #[inline]
    pub fn h(&self, p: usize, q: usize) -> f64 {
        self.h[p * self.norb + q]
    }

    /// `(pq|rs)` in chemists' notation.
    #[inline]
    pub fn g(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let m = self.norb;
        self.g[((p * m + q) * m + r) * m + s]
    }

    pub fn with_electrons(&self, n_alpha: usize, n_beta: usize) -> Result<Self, FcidumpError> {
        let mut out = self.clone();
        if n_alpha > self.norb || n_beta > self.norb {
            return Err(FcidumpError::Invalid("electron count exceeds norb".into()));
        }
        out.n_alpha = n_alpha;
        out.n_beta = n_beta;
        Ok(out)
    }

    fn set_h(&mut self, p: usize, q: usize, v: f64) {
        let m = self.norb;
        self.h[p * m + q] = v;
        self.h[q * m + p] = v;
    }

    fn set_g(&mut self, p: usize, q: usize, r: usize, s: usize, v: f64) {
        let m = self.norb;
        for (a, b, c, d) in symmetry_class(p, q, r, s) {
            self.g[((a * m + b) * m + c) * m + d] = v;
        }
    }

    /// Canonical representatives of the one-electron table: `p >= q`.
    pub fn one_body_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.norb).flat_map(move |p| (0..=p).map(move |q| (p, q, self.h(p, q))))
    }

    /// Canonical representatives of the two-electron table:
    /// `p >= q`, `r >= s`, `pq >= rs` (compound index).
    pub fn two_body_entries(&self) -> impl Iterator<Item = (usize, usize, usize, usize, f64)> + '_ {
        let m = self.norb;
        (0..m).flat_map(move |p| {
            (0..=p).flat_map(move |q| {
                let pq = p * (p + 1) / 2 + q;
                (0..m).flat_map(move |r| {
                    (0..=r).filter_map(move |s| {
                        let rs = r * (r + 1) / 2 + s;
                        (pq >= rs).then(|| (p, q, r, s, self.g(p, q, r, s)))
                    })
                })
            })
        })
    }
}

/// Serialized form used by the `parse` command: canonical non-zero entries only.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HamiltonianDocument {
    pub norb: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub e_core: f64,
    pub one_body: Vec<(usize, usize, f64)>,
    pub two_body: Vec<(usize, usize, usize, usize, f64)>,
}

impl From<&FermionHamiltonian> for HamiltonianDocument {
    fn from(ham: &FermionHamiltonian) -> Self {
        Self {
            norb: ham.norb,
            n_alpha: ham.n_alpha,
            n_beta: ham.n_beta,
            e_core: ham.e_core,
            one_body: ham.one_body_entries().filter(|e| e.2 != 0.0).collect(),
            two_body: ham.two_body_entries().filter(|e| e.4 != 0.0).collect(),
        }
    }
}

impl TryFrom<&HamiltonianDocument> for FermionHamiltonian {
    type Error = FcidumpError;

    fn try_from(doc: &HamiltonianDocument) -> Result<Self, Self::Error> {
        let mut ham = FermionHamiltonian::zero(doc.norb, doc.n_alpha, doc.n_beta)?;
        ham.e_core = doc.e_core;
        for &(p, q, v) in &doc.one_body {
            if p >= doc.norb || q >= doc.norb {
                return Err(FcidumpError::Invalid(format!("one-body index ({p},{q}) out of range")));
            }
            ham.set_h(p, q, v);
        }
        for &(p, q, r, s, v) in &doc.two_body {
            if [p, q, r, s].iter().any(|&i| i >= doc.norb) {
                return Err(FcidumpError::Invalid(format!("two-body index ({p},{q},{r},{s}) out of range")));
            }
            ham.set_g(p, q, r, s, v);
        }
        Ok(ham)
    }
}

struct Header {
    norb: usize,
    nelec: i64,
    ms2: i64,
}

fn parse_header(lines: &[(usize, &str)]) -> Result<(Header, usize), FcidumpError> {
    // Collect everything up to the namelist terminator (`/` or `&END`).
    let mut text = String::new();
    let mut consumed = 0;
    let mut terminated = false;
    let first_line = lines.first().map(|l| l.0).unwrap_or(1);
    for (i, (_, raw)) in lines.iter().enumerate() {
        consumed = i + 1;
        let upper = raw.trim().to_ascii_uppercase();
        if let Some(pos) = upper.find("&END").or_else(|| upper.find('/')) {
            text.push_str(&upper[..pos]);
            terminated = true;
            break;
        }
        text.push_str(&upper);
        text.push(' ');
    }
    if !terminated {
        return Err(FcidumpError::Parse { line: first_line, msg: "header is not terminated by '/' or '&END'".into() });
    }
    let text = text.trim_start();
    let body = text
        .strip_prefix("&FCI")
        .ok_or_else(|| FcidumpError::Parse { line: first_line, msg: "expected '&FCI' namelist header".into() })?;
    let header_line = lines[consumed - 1].0;

    // Split `KEY=v1,v2,...` groups: a new key starts at any token containing '='.
    let mut fields: HashMap<String, Vec<String>> = HashMap::new();
    let mut current: Option<String> = None;
    let normalized = body.replace(',', " ");
    let normalized = normalized.replace('=', " = ");
    let tokens: Vec<&str> = normalized.split_whitespace().collect();
    let mut i = 0;
    while i < tokens.len() {
        if i + 1 < tokens.len() && tokens[i + 1] == "=" {
            let key = tokens[i].to_string();
            fields.entry(key.clone()).or_default();
            current = Some(key);
            i += 2;
            continue;
        }
        match &current {
            Some(key) => fields.get_mut(key).expect("key inserted").push(tokens[i].to_string()),
            None => {
                return Err(FcidumpError::Parse {
                    line: header_line,
                    msg: format!("unexpected token '{}' in header", tokens[i]),
                })
            }
        }
        i += 1;
    }
    let int_field = |key: &str, default: Option<i64>| -> Result<i64, FcidumpError> {
        match fields.get(key).and_then(|v| v.first()) {
            Some(v) => v
                .parse::<i64>()
                .map_err(|_| FcidumpError::Parse { line: header_line, msg: format!("{key}={v} is not an integer") }),
            None => default
                .ok_or_else(|| FcidumpError::Parse { line: header_line, msg: format!("missing {key} in header") }),
        }
    };
    let norb = int_field("NORB", None)?;
    let nelec = int_field("NELEC", None)?;
    let ms2 = int_field("MS2", Some(0))?;
    // ORBSYM and ISYM are accepted and ignored.
    if !(1..=64).contains(&norb) {
        return Err(FcidumpError::Parse { line: header_line, msg: format!("NORB={norb} must be in 1..=64") });
    }
    if nelec < 0 || (nelec + ms2) % 2 != 0 || nelec - ms2.abs() < 0 {
        return Err(FcidumpError::Inconsistent { line: header_line, nelec, ms2 });
    }
    Ok((Header { norb: norb as usize, nelec, ms2 }, consumed))
}

fn parse_value(tok: &str) -> Option<f64> {
    tok.replace(['D', 'd'], "E").parse::<f64>().ok()
}

/// Parses FCIDUMP text.
///
/// Lines `p 0 0 0` (orbital energies) are skipped.
pub fn parse_fcidump(text: &str) -> Result<FermionHamiltonian, FcidumpError> {
    let lines: Vec<(usize, &str)> =
        text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty()).collect();
    let (header, consumed) = parse_header(&lines)?;
    let norb = header.norb;
    let n_alpha = ((header.nelec + header.ms2) / 2) as usize;
    let n_beta = ((header.nelec - header.ms2) / 2) as usize;
    if n_alpha > norb || n_beta > norb {
        return Err(FcidumpError::Inconsistent { line: lines[consumed - 1].0, nelec: header.nelec, ms2: header.ms2 });
    }
    let mut ham = FermionHamiltonian::zero(norb, n_alpha, n_beta)
        .map_err(|e| FcidumpError::Parse { line: lines[consumed - 1].0, msg: e.to_string() })?;
    let mut seen_h = vec![false; norb * norb];
    let mut seen_g = vec![false; norb.pow(4)];
    let mut seen_core = false;

    for &(line, raw) in &lines[consumed..] {
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(FcidumpError::Parse {
                line,
                msg: format!("expected 'value p q r s', found {} fields", toks.len()),
            });
        }
        let value = parse_value(toks[0])
            .ok_or_else(|| FcidumpError::Parse { line, msg: format!("'{}' is not a number", toks[0]) })?;
        let mut idx = [0usize; 4];
        for (k, tok) in toks[1..].iter().enumerate() {
            let raw_idx: i64 = tok
                .parse()
                .map_err(|_| FcidumpError::Parse { line, msg: format!("'{tok}' is not an integer index") })?;
            if raw_idx < 0 || raw_idx > norb as i64 {
                return Err(FcidumpError::Range { line, index: raw_idx, norb });
            }
            idx[k] = raw_idx as usize;
        }
        let [p, q, r, s] = idx;
        let conflict = |old: f64, p, q, r, s| {
            if (old - value).abs() > CONFLICT_TOL {
                Err(FcidumpError::Conflict { line, p, q, r, s, old, new: value })
            } else {
                Ok(())
            }
        };
        match (p, q, r, s) {
            (0, 0, 0, 0) => {
                if seen_core {
                    conflict(ham.e_core, 0, 0, 0, 0)?;
                }
                seen_core = true;
                ham.e_core = value;
            }
            (p, 0, 0, 0) if p > 0 => {}
            (p, q, 0, 0) if p > 0 && q > 0 => {
                let (p0, q0) = (p - 1, q - 1);
                let slot = p0 * norb + q0;
                if seen_h[slot] {
                    conflict(ham.h(p0, q0), p, q, 0, 0)?;
                }
                seen_h[slot] = true;
                seen_h[q0 * norb + p0] = true;
                ham.set_h(p0, q0, value);
            }
            (p, q, r, s) if p > 0 && q > 0 && r > 0 && s > 0 => {
                let (a, b, c, d) = (p - 1, q - 1, r - 1, s - 1);
                let slot = ((a * norb + b) * norb + c) * norb + d;
                if seen_g[slot] {
                    conflict(ham.g(a, b, c, d), p, q, r, s)?;
                }
                for (w, x, y, z) in symmetry_class(a, b, c, d) {
                    seen_g[((w * norb + x) * norb + y) * norb + z] = true;
                }
                ham.set_g(a, b, c, d, value);
            }
            _ => {
                return Err(FcidumpError::Parse {
                    line,
                    msg: format!("index pattern ({p} {q} {r} {s}) is not a valid integral"),
                })
            }
        }
    }
    Ok(ham)
}

fn fmt_value(v: f64) -> String {
    // 17 significant digits round-trip every finite f64.
    format!("{v:.16e}")
}

/// Writes FCIDUMP text; one line per non-zero canonical integral, core energy last.
pub fn write_fcidump(ham: &FermionHamiltonian) -> String {
    let mut out = String::new();
    let nelec = ham.n_alpha + ham.n_beta;
    let ms2 = ham.n_alpha as i64 - ham.n_beta as i64;
    let orbsym = vec!["1"; ham.norb].join(",");
    let _ = writeln!(out, " &FCI NORB={},NELEC={},MS2={},", ham.norb, nelec, ms2);
    let _ = writeln!(out, "  ORBSYM={orbsym},");
    let _ = writeln!(out, "  ISYM=1,");
    let _ = writeln!(out, " &END");
    for (p, q, r, s, v) in ham.two_body_entries() {
        if v != 0.0 {
            let _ = writeln!(out, "{} {} {} {} {}", fmt_value(v), p + 1, q + 1, r + 1, s + 1);
        }
    }
    for (p, q, v) in ham.one_body_entries() {
        if v != 0.0 {
            let _ = writeln!(out, "{} {} {} 0 0", fmt_value(v), p + 1, q + 1);
        }
    }
    let _ = writeln!(out, "{} 0 0 0 0", fmt_value(ham.e_core));
    out
}

/// Open-boundary Hubbard chain with hopping `-t` and on-site repulsion `u`.
pub fn make_hubbard_chain(
    sites: usize,
    u: f64,
    t: f64,
    n_alpha: usize,
    n_beta: usize,
) -> Result<FermionHamiltonian, FcidumpError> {
    if sites < 2 {
        return Err(FcidumpError::Invalid(format!("Hubbard chain needs at least 2 sites, got {sites}")));
    }
    let mut ham = FermionHamiltonian::zero(sites, n_alpha, n_beta)?;
    for i in 0..sites - 1 {
        ham.set_h(i, i + 1, -t);
    }
    for i in 0..sites {
        ham.set_g(i, i, i, i, u);
    }
    Ok(ham)
}

/// Random real Hamiltonian with the full index symmetry, for tests and benchmarks.
pub fn random_hamiltonian<R: rand::Rng>(
    norb: usize,
    n_alpha: usize,
    n_beta: usize,
    rng: &mut R,
) -> Result<FermionHamiltonian, FcidumpError> {
    let mut ham = FermionHamiltonian::zero(norb, n_alpha, n_beta)?;
    ham.e_core = rng.gen_range(-1.0..1.0);
    for p in 0..norb {
        for q in 0..=p {
            ham.set_h(p, q, rng.gen_range(-1.0..1.0));
        }
    }
    let entries: Vec<_> = ham.two_body_entries().map(|e| (e.0, e.1, e.2, e.3)).collect();
    for (p, q, r, s) in entries {
        ham.set_g(p, q, r, s, rng.gen_range(-0.5..0.5));
    }
    Ok(ham)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIMER: &str = "&FCI NORB=2,NELEC=2,MS2=0,\n ORBSYM=1,1,\n ISYM=1,\n&END\n\
        4.0 1 1 1 1\n4.0 2 2 2 2\n-1.0 1 2 0 0\n0.0 0 0 0 0\n";

    #[test]
    fn parses_hubbard_dimer() {
        let ham = parse_fcidump(DIMER).unwrap();
        assert_eq!(ham, make_hubbard_chain(2, 4.0, 1.0, 1, 1).unwrap());
        assert_eq!(ham.h(0, 1), -1.0);
        assert_eq!(ham.h(1, 0), -1.0);
        assert_eq!(ham.n_alpha(), 1);
        assert_eq!(ham.n_beta(), 1);
    }

    #[test]
    fn index_above_norb_is_range_error() {
        let text = "&FCI NORB=2,NELEC=2,MS2=0 /\n1.0 3 1 0 0\n";
        assert!(matches!(parse_fcidump(text), Err(FcidumpError::Range { line: 2, index: 3, .. })));
    }

    #[test]
    fn odd_spin_split_is_inconsistent() {
        let text = "&FCI NORB=2,NELEC=3,MS2=0 /\n0.0 0 0 0 0\n";
        assert!(matches!(parse_fcidump(text), Err(FcidumpError::Inconsistent { line: 1, .. })));
    }

    #[test]
    fn conflicting_duplicate_is_rejected() {
        let text = "&FCI NORB=2,NELEC=2,MS2=0 /\n0.5 1 2 1 2\n0.6 2 1 2 1\n";
        let err = parse_fcidump(text).unwrap_err();
        assert!(matches!(err, FcidumpError::Conflict { line: 3, .. }), "{err}");
        // Same value through a symmetric index is fine.
        let ok = "&FCI NORB=2,NELEC=2,MS2=0 /\n0.5 1 2 1 2\n0.5 2 1 2 1\n";
        assert_eq!(parse_fcidump(ok).unwrap().g(1, 0, 0, 1), 0.5);
    }

    #[test]
    fn malformed_header_reports_line() {
        let text = "\n\n&FCI NORB=two,NELEC=2 /\n";
        assert_eq!(
            parse_fcidump(text).unwrap_err(),
            FcidumpError::Parse { line: 3, msg: "NORB=TWO is not an integer".into() }
        );
        let unterminated = "&FCI NORB=2,NELEC=2\n1.0 1 1 0 0\n";
        assert!(matches!(parse_fcidump(unterminated), Err(FcidumpError::Parse { line: 1, .. })));
        let bad_pattern = "&FCI NORB=2,NELEC=2 /\n1.0 1 0 1 0\n";
        assert!(matches!(parse_fcidump(bad_pattern), Err(FcidumpError::Parse { line: 2, .. })));
    }

    #[test]
    fn header_is_case_and_whitespace_tolerant() {
        let text = "  &fci  norb = 2 , nelec=2,\n ms2= 0, orbsym = 1, 1\n isym=1 /\n1.5D0 1 1 0 0\n";
        let ham = parse_fcidump(text).unwrap();
        assert_eq!(ham.h(0, 0), 1.5);
    }

    #[test]
    fn every_permutation_returns_same_value() {
        let text = "&FCI NORB=3,NELEC=2,MS2=0 /\n0.25 1 2 3 1\n";
        let ham = parse_fcidump(text).unwrap();
        for (p, q, r, s) in symmetry_class(0, 1, 2, 0) {
            assert_eq!(ham.g(p, q, r, s), 0.25);
        }
        assert_eq!(ham.g(0, 0, 1, 2), 0.0);
    }

    #[test]
    fn zero_hamiltonian_writes_only_core_line() {
        let text = write_fcidump(&FermionHamiltonian::zero(3, 1, 1).unwrap());
        let body: Vec<&str> = text.lines().skip_while(|l| !l.contains("&END")).skip(1).collect();
        assert_eq!(body.len(), 1);
        assert!(body[0].ends_with(" 0 0 0 0"));
        assert_eq!(parse_value(body[0].split_whitespace().next().unwrap()), Some(0.0));
    }

    #[test]
    fn hubbard_rejects_single_site() {
        assert!(make_hubbard_chain(1, 4.0, 1.0, 1, 1).is_err());
    }

    #[test]
    fn hubbard_fields() {
        let ham = make_hubbard_chain(4, 2.0, 0.5, 2, 2).unwrap();
        assert_eq!(ham.h(1, 2), -0.5);
        assert_eq!(ham.h(0, 2), 0.0);
        assert_eq!(ham.g(3, 3, 3, 3), 2.0);
        assert_eq!(ham.g(0, 0, 1, 1), 0.0);
        assert_eq!(ham.e_core(), 0.0);
    }

    #[test]
    fn document_round_trip() {
        let ham = make_hubbard_chain(3, 4.0, 1.0, 2, 1).unwrap();
        let doc = HamiltonianDocument::from(&ham);
        let json = serde_json::to_string(&doc).unwrap();
        let back: HamiltonianDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(FermionHamiltonian::try_from(&back).unwrap(), ham);
    }
}
