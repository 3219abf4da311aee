//! Text forms for states: `<basis>:<index>` labels and OAM coefficient lists.
//!
//! Labels name a column of one of the built-in bases:
//!
//! * `I:1` .. `III:6` for the qusix triple,
//! * `O1:1` .. `O4:3` (also `O_2`) for the qutrit OAM bases, where the index
//!   may also be written as `alpha2`, `beta3`, `gamma1`, or as a signed
//!   charge `-1`, `0`, `+1` for `O1`,
//! * `pi1:1` .. `pi3:2` (also `pi_3`) for polarization, with `H V`, `A D`,
//!   `L R` accepted as indices.
//!
//! Indices are 1-based.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::experiment::QusixEncoding;
use crate::mub::{oam_qutrit_mubs, polarization_mubs, qusix_mubs, Basis, State};
use crate::optics::{OamSuperposition, QUTRIT_CHARGES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisName {
    /// `I`, `II`, `III` as 0, 1, 2.
    Qusix(usize),
    /// `O_1..O_4` as 0..=3.
    Oam(usize),
    /// `pi_1..pi_3` as 0..=2.
    Polarization(usize),
}

impl BasisName {
    pub fn basis(self) -> Basis {
        match self {
            BasisName::Qusix(k) => qusix_mubs().bases[k].clone(),
            BasisName::Oam(k) => oam_qutrit_mubs().bases[k].clone(),
            BasisName::Polarization(k) => polarization_mubs().bases[k].clone(),
        }
    }

    pub fn size(self) -> usize {
        match self {
            BasisName::Qusix(_) => 6,
            BasisName::Oam(_) => 3,
            BasisName::Polarization(_) => 2,
        }
    }
}

impl FromStr for BasisName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let numbered = |prefix: &str, count: usize| -> Option<usize> {
            let rest = s.strip_prefix(prefix)?;
            let rest = rest.strip_prefix('_').unwrap_or(rest);
            let k: usize = rest.parse().ok()?;
            (1..=count).contains(&k).then(|| k - 1)
        };
        match s {
            "I" => return Ok(BasisName::Qusix(0)),
            "II" => return Ok(BasisName::Qusix(1)),
            "III" => return Ok(BasisName::Qusix(2)),
            _ => {}
        }
        if let Some(k) = numbered("O", 4) {
            return Ok(BasisName::Oam(k));
        }
        if let Some(k) = numbered("pi", 3) {
            return Ok(BasisName::Polarization(k));
        }
        Err(Error::Parse(format!("unknown basis `{s}`")))
    }
}

impl fmt::Display for BasisName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisName::Qusix(k) => f.write_str(["I", "II", "III"][*k]),
            BasisName::Oam(k) => write!(f, "O{}", k + 1),
            BasisName::Polarization(k) => write!(f, "pi{}", k + 1),
        }
    }
}

/// One column of a named basis; `index` is 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateLabel {
    pub basis: BasisName,
    pub index: usize,
}

const GREEK: [&str; 3] = ["alpha", "beta", "gamma"];
const POL_NAMES: [[&str; 2]; 3] = [["H", "V"], ["A", "D"], ["L", "R"]];

fn named_index(basis: BasisName, s: &str) -> Option<usize> {
    match basis {
        BasisName::Oam(0) => match s {
            "-1" => Some(0),
            "0" => Some(1),
            "+1" => Some(2),
            _ => None,
        },
        BasisName::Oam(b) => {
            let k: usize = s.strip_prefix(GREEK[b - 1])?.parse().ok()?;
            (1..=3).contains(&k).then(|| k - 1)
        }
        BasisName::Polarization(b) => POL_NAMES[b].iter().position(|n| *n == s),
        BasisName::Qusix(_) => None,
    }
}

impl FromStr for StateLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (b, i) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("state label `{s}` is not `<basis>:<index>`")))?;
        let basis: BasisName = b.trim().parse()?;
        let i = i.trim();
        let index = match named_index(basis, i) {
            Some(k) => k,
            None => {
                let k: usize = i
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad index `{i}` in `{s}`")))?;
                if k == 0 || k > basis.size() {
                    return Err(Error::Parse(format!(
                        "index {k} out of range 1..={} for basis {basis}",
                        basis.size()
                    )));
                }
                k - 1
            }
        };
        Ok(StateLabel { basis, index })
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.basis, self.index + 1)
    }
}

impl StateLabel {
    /// Coefficient vector in the basis' own Hilbert space.
    pub fn state(&self) -> State {
        self.basis.basis().column(self.index).clone()
    }

    /// Position among the 18 qusix states, if this is a qusix label.
    pub fn qusix_position(&self) -> Option<usize> {
        match self.basis {
            BasisName::Qusix(k) => Some(k * 6 + self.index),
            _ => None,
        }
    }

    /// The OAM field a hologram must produce for this state. Qusix labels
    /// use `enc`; polarization labels carry no OAM content.
    pub fn oam_superposition(&self, enc: &QusixEncoding) -> Result<OamSuperposition> {
        match self.basis {
            BasisName::Qusix(_) => enc.oam_part(self.qusix_position().expect("qusix label")),
            BasisName::Oam(_) => OamSuperposition::from_state(&self.state(), &QUTRIT_CHARGES),
            BasisName::Polarization(_) => Err(Error::Parse(format!(
                "`{self}` is a polarization state and has no OAM content"
            ))),
        }
    }
}

/// Parses `charge:coefficient` pairs separated by commas or whitespace, for
/// example `"-1:1, 1:0.5+0.5i"`. Coefficients use the `a+bi` form and are
/// normalized; charges must be distinct.
pub fn parse_coefficients(s: &str) -> Result<OamSuperposition> {
    let mut terms = Vec::new();
    for item in s.split(|c: char| c == ',' || c.is_whitespace()) {
        if item.is_empty() {
            continue;
        }
        let (m, coeff) = item
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("coefficient `{item}` is not `charge:value`")))?;
        let m: i32 = m
            .parse()
            .map_err(|_| Error::Parse(format!("bad charge `{m}`")))?;
        let coeff = Complex64::from_str(coeff)
            .map_err(|_| Error::Parse(format!("bad coefficient `{coeff}`")))?;
        if !coeff.re.is_finite() || !coeff.im.is_finite() {
            return Err(Error::Parse(format!("non-finite coefficient `{item}`")));
        }
        terms.push((m, coeff));
    }
    if terms.is_empty() {
        return Err(Error::Parse("empty coefficient list".into()));
    }
    OamSuperposition::normalized(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::EncodingKind;

    fn label(s: &str) -> StateLabel {
        s.parse().unwrap()
    }

    #[test]
    fn grammar() {
        assert_eq!(label("I:1"), StateLabel { basis: BasisName::Qusix(0), index: 0 });
        assert_eq!(label("III:6").qusix_position(), Some(17));
        assert_eq!(label("O2:alpha1"), label("O_2:1"));
        assert_eq!(label("O4:gamma3"), label("O4:3"));
        assert_eq!(label("O1:+1"), label("O1:3"));
        assert_eq!(label("O1:0"), label("O1:2"));
        assert_eq!(label("pi3:R"), label("pi_3:2"));
        for bad in ["I", "IV:1", "I:0", "I:7", "O5:1", "O2:beta1", "pi2:H", "O1:", ":1", "O3:beta4"] {
            assert!(bad.parse::<StateLabel>().is_err(), "{bad}");
        }
    }

    #[test]
    fn display_round_trip() {
        for s in ["I:3", "II:6", "O1:2", "O4:1", "pi2:2"] {
            assert_eq!(label(s).to_string(), s);
        }
    }

    #[test]
    fn states_resolve() {
        assert_eq!(label("I:3").state(), qusix_mubs().bases[0].column(2).clone());
        assert_eq!(label("O3:beta2").state(), oam_qutrit_mubs().bases[2].column(1).clone());
        assert_eq!(label("pi1:V").state(), State::basis_vector(2, 1));
        assert_eq!("O_4".parse::<BasisName>().unwrap().basis().label, "O_4");
    }

    #[test]
    fn pure_oam_i3_is_charge_minus_one() {
        let enc = QusixEncoding::new(EncodingKind::PureOam);
        let sup = label("I:3").oam_superposition(&enc).unwrap();
        let nonzero: Vec<i32> = sup
            .terms()
            .iter()
            .filter(|(_, c)| c.norm() > 1e-12)
            .map(|(m, _)| *m)
            .collect();
        assert_eq!(nonzero, vec![-1]);
    }

    #[test]
    fn coefficient_lists() {
        let s = parse_coefficients("0:1").unwrap();
        assert_eq!(s.terms(), &[(0, Complex64::new(1.0, 0.0))]);
        let s = parse_coefficients("-1:1, 1:1i").unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.terms()[1].1 - Complex64::new(0.0, h)).norm() < 1e-15);
        for bad in ["", "0", "x:1", "0:q", "0:0", "1:1 1:2", "0:NaN"] {
            assert!(parse_coefficients(bad).is_err(), "{bad}");
        }
    }
}
