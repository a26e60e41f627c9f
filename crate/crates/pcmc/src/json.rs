//! JSON persistence for models, fit reports, error reports and audits, and
//! CSV output for learning curves.
//!
//! Every float is written with 17 significant digits, so files round-trip
//! bit for bit and identical runs produce identical bytes.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use pcmc_core::axioms::{AuditReport, Witness};
use pcmc_core::eval::{ErrorReport, LearningCurve};
use pcmc_core::{
    BladeChest, BladeChestVariant, Error, FitReport, FittedModel, MmnlModel, MnlModel, PcmcModel,
    RateMatrix,
};

/// Scientific notation with 17 significant digits; non-finite values become `null`.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_owned()
    }
}

/// A float that serializes through [`format_f64`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(format_f64(self.0)).expect("valid JSON number");
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Option::<f64>::deserialize(d).map(|x| Num(x.unwrap_or(f64::NAN)))
    }
}

fn nums(xs: &[f64]) -> Vec<Num> {
    xs.iter().copied().map(Num).collect()
}

fn floats(xs: &[Num]) -> Vec<f64> {
    xs.iter().map(|x| x.0).collect()
}

/// On-disk form of every model family, tagged by `"model"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelFile {
    Pcmc {
        n: usize,
        rates: Vec<Num>,
    },
    Mnl {
        gamma: Vec<Num>,
    },
    Mmnl {
        weights: Vec<Num>,
        components: Vec<Vec<Num>>,
    },
    Bladechest {
        variant: String,
        d: usize,
        blades: Vec<Vec<Num>>,
        chests: Vec<Vec<Num>>,
    },
}

impl From<&FittedModel> for ModelFile {
    fn from(m: &FittedModel) -> Self {
        match m {
            FittedModel::Pcmc(p) => ModelFile::Pcmc {
                n: p.q().n(),
                rates: nums(p.q().rates()),
            },
            FittedModel::Mnl(m) => ModelFile::Mnl {
                gamma: nums(m.gamma()),
            },
            FittedModel::Mmnl(m) => ModelFile::Mmnl {
                weights: nums(m.weights()),
                components: m.components().iter().map(|c| nums(c.gamma())).collect(),
            },
            FittedModel::BladeChest(b) => ModelFile::Bladechest {
                variant: b.variant().name().to_owned(),
                d: b.d(),
                blades: b.blades().iter().map(|v| nums(v)).collect(),
                chests: b.chests().iter().map(|v| nums(v)).collect(),
            },
        }
    }
}

impl TryFrom<ModelFile> for FittedModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self, Error> {
        Ok(match f {
            ModelFile::Pcmc { n, rates } => {
                FittedModel::Pcmc(PcmcModel::new(RateMatrix::new(n, floats(&rates))?)?)
            }
            ModelFile::Mnl { gamma } => FittedModel::Mnl(MnlModel::new(floats(&gamma))?),
            ModelFile::Mmnl {
                weights,
                components,
            } => {
                let comps = components
                    .iter()
                    .map(|g| MnlModel::new(floats(g)))
                    .collect::<Result<Vec<_>, _>>()?;
                FittedModel::Mmnl(MmnlModel::new(comps, floats(&weights))?)
            }
            ModelFile::Bladechest {
                variant,
                d,
                blades,
                chests,
            } => {
                let variant = match variant.as_str() {
                    "distance" => BladeChestVariant::Distance,
                    "inner" => BladeChestVariant::Inner,
                    _ => {
                        return Err(Error::InvalidConfig(
                            "variant must be 'distance' or 'inner'",
                        ))
                    }
                };
                let blades: Vec<Vec<f64>> = blades.iter().map(|v| floats(v)).collect();
                let chests: Vec<Vec<f64>> = chests.iter().map(|v| floats(v)).collect();
                let bc = BladeChest::new(blades, chests, variant)?;
                if bc.d() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: bc.d(),
                    });
                }
                FittedModel::BladeChest(bc)
            }
        })
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn model_to_json(m: &FittedModel) -> String {
    to_json(&ModelFile::from(m))
}

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid model parameters: {0}")]
    Model(#[from] Error),
}

pub fn model_from_json(text: &str) -> Result<FittedModel, ModelFileError> {
    let file: ModelFile = serde_json::from_str(text)?;
    Ok(FittedModel::try_from(file)?)
}

/// A fit outcome. The spectral MNL fit reports no iteration count or
/// starting likelihood, so those fields are optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReportFile {
    pub params: ModelFile,
    pub loglik: Num,
    pub initial_loglik: Option<Num>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub constraint_violation: Num,
}

impl FitReportFile {
    pub fn from_report<M>(r: &FitReport<M>, wrap: impl FnOnce(M) -> FittedModel) -> Self
    where
        M: Clone,
    {
        Self {
            params: ModelFile::from(&wrap(r.params.clone())),
            loglik: Num(r.loglik),
            initial_loglik: Some(Num(r.initial_loglik)),
            iterations: Some(r.iterations),
            converged: Some(r.converged),
            constraint_violation: Num(r.constraint_violation),
        }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

#[derive(Serialize)]
struct SetError {
    set: Vec<usize>,
    error: Num,
}

#[derive(Serialize)]
struct ErrorReportFile {
    error: Num,
    n_test: usize,
    per_set_errors: Vec<SetError>,
}

pub fn error_report_to_json(r: &ErrorReport) -> String {
    to_json(&ErrorReportFile {
        error: Num(r.error),
        n_test: r.n_test,
        per_set_errors: r
            .per_set_errors
            .iter()
            .map(|(set, &e)| SetError {
                set: set.clone(),
                error: Num(e),
            })
            .collect(),
    })
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum WitnessFile {
    Regularity {
        item: usize,
        a: Vec<usize>,
        b: Vec<usize>,
        p_a: Num,
        p_b: Num,
    },
    CyclicTriple {
        items: [usize; 3],
    },
    Tie {
        items: [usize; 2],
    },
    RatePair {
        i: usize,
        j: usize,
        shortfall: Num,
    },
}

#[derive(Serialize)]
struct CheckFile {
    name: String,
    passed: bool,
    margin: Num,
    witnesses: Vec<WitnessFile>,
}

#[derive(Serialize)]
struct AuditFile<'a> {
    model: &'a str,
    all_passed: bool,
    checks: Vec<CheckFile>,
}

pub fn audit_to_json(model: &str, r: &AuditReport) -> String {
    let checks = r
        .checks
        .iter()
        .map(|c| CheckFile {
            name: c.name.clone(),
            passed: c.passed,
            margin: Num(c.margin),
            witnesses: c
                .witnesses
                .iter()
                .map(|w| match w {
                    Witness::Regularity(v) => WitnessFile::Regularity {
                        item: v.item,
                        a: v.a.clone(),
                        b: v.b.clone(),
                        p_a: Num(v.p_a),
                        p_b: Num(v.p_b),
                    },
                    Witness::CyclicTriple(t) => WitnessFile::CyclicTriple { items: *t },
                    Witness::Tie(i, j) => WitnessFile::Tie { items: [*i, *j] },
                    Witness::Pair { i, j, shortfall } => WitnessFile::RatePair {
                        i: *i,
                        j: *j,
                        shortfall: Num(*shortfall),
                    },
                })
                .collect(),
        })
        .collect();
    to_json(&AuditFile {
        model,
        all_passed: r.all_passed(),
        checks,
    })
}

/// `model,fraction,mean_error,std_error,permutations`, one row per model
/// and fraction. Cells where every permutation failed read `nan`.
pub fn curve_to_csv(c: &LearningCurve) -> String {
    let cell = |x: f64| {
        if x.is_finite() {
            format_f64(x)
        } else {
            "nan".to_owned()
        }
    };
    let mut out = String::from("model,fraction,mean_error,std_error,permutations\n");
    for (mi, model) in c.models.iter().enumerate() {
        for (fi, &f) in c.fractions.iter().enumerate() {
            out.push_str(&format!(
                "{model},{},{},{},{}\n",
                cell(f),
                cell(c.mean_errors[mi][fi]),
                cell(c.std_errors[mi][fi]),
                c.permutations
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(format_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(format_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(format_f64(f64::NAN), "null");
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, 6.02e23] {
            assert_eq!(format_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn pcmc_file_shape() {
        let q = RateMatrix::new(2, vec![0.0, 0.25, 0.75, 0.0]).unwrap();
        let m = FittedModel::Pcmc(PcmcModel::new(q).unwrap());
        let text = model_to_json(&m);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["model"], "pcmc");
        assert_eq!(v["n"], 2);
        assert_eq!(v["rates"].as_array().unwrap().len(), 4);
        assert!(text.contains("2.5000000000000000e-1"));
        assert_eq!(model_from_json(&text).unwrap(), m);
    }

    #[test]
    fn every_family_round_trips() {
        let mnl = MnlModel::new(vec![0.2, 0.3, 0.5]).unwrap();
        let mmnl = MmnlModel::new(
            vec![mnl.clone(), MnlModel::new(vec![0.6, 0.3, 0.1]).unwrap()],
            vec![0.25, 0.75],
        )
        .unwrap();
        let bc = BladeChest::new(
            vec![vec![0.1, 0.2], vec![-1.0, 0.5]],
            vec![vec![0.3, -0.7], vec![2.0, 1.0 / 3.0]],
            BladeChestVariant::Inner,
        )
        .unwrap();
        for m in [
            FittedModel::Mnl(mnl),
            FittedModel::Mmnl(mmnl),
            FittedModel::BladeChest(bc),
        ] {
            assert_eq!(model_from_json(&model_to_json(&m)).unwrap(), m);
        }
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(
            model_from_json("{\"model\":\"nope\"}"),
            Err(ModelFileError::Json(_))
        ));
        assert!(matches!(
            model_from_json("{\"model\":\"pcmc\",\"n\":2,\"rates\":[0,0.1,0.1,0]}"),
            Err(ModelFileError::Model(_))
        ));
        assert!(matches!(
            model_from_json("{\"model\":\"mnl\",\"gamma\":[1,-1]}"),
            Err(ModelFileError::Model(Error::NonpositiveGamma { .. }))
        ));
    }
}
