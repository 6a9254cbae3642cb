//! Faces of the parameter space as families in their own right, used by
//! the boundary code.

use std::sync::Arc;

use crate::error::{MdlError, Result};
use crate::linalg::Matrix;
use crate::models::family::{BoundaryScheme, Family, FamilyRef};
use crate::models::space::{Face, ParamSpace};

/// Maps face coordinates back to the parent's coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Embedding {
    /// Free mixture weights; `free[0]` is the face's base component.
    Mixture {
        k: usize,
        free: Vec<usize>,
        tau: f64,
    },
    /// Box coordinates not in `free` are fixed at their value in `template`.
    Box { template: Vec<f64>, free: Vec<usize> },
}

impl Embedding {
    pub fn embed(&self, sub: &[f64]) -> Vec<f64> {
        match self {
            Embedding::Mixture { k, free, tau } => {
                let pinned = k + 1 - free.len();
                let scale = 1.0 - tau * pinned as f64;
                let mut w = vec![*tau; k + 1];
                w[free[0]] = scale * (1.0 - sub.iter().sum::<f64>());
                for (j, s) in free[1..].iter().zip(sub) {
                    w[*j] = scale * s;
                }
                w[1..].to_vec()
            }
            Embedding::Box { template, free } => {
                let mut t = template.clone();
                for (i, s) in free.iter().zip(sub) {
                    t[*i] = *s;
                }
                t
            }
        }
    }
}

/// A face of the parameter space with its flat descriptor.
#[derive(Debug, Clone)]
pub struct Restriction {
    pub family: FamilyRef,
    pub embedding: Embedding,
    pub active: Vec<Face>,
    /// Index of the face among all `descriptor_count` faces.
    pub descriptor: u64,
    pub descriptor_count: u64,
}

impl Restriction {
    /// Flat code length of the descriptor in nats.
    pub fn descriptor_nats(&self) -> f64 {
        (self.descriptor_count as f64).ln()
    }
}

/// Number of codewords of the flat face descriptor.
pub fn descriptor_count(family: &dyn Family) -> Result<u64> {
    let k = family.dim() as u32;
    match family.boundary_scheme() {
        BoundaryScheme::MixtureFaces => Ok(2u64.pow(k + 1)),
        BoundaryScheme::BoxFaces => Ok(3u64.pow(k)),
        BoundaryScheme::None => Err(MdlError::Unsupported(format!(
            "{} has no boundary scheme",
            family.name()
        ))),
    }
}

/// Inverse of the descriptor numbering: the active faces a descriptor
/// stands for. Out-of-range descriptors are rejected.
pub fn faces_from_descriptor(family: &dyn Family, descriptor: u64) -> Result<Vec<Face>> {
    let count = descriptor_count(family)?;
    if descriptor >= count {
        return Err(MdlError::precondition(format!(
            "face descriptor {descriptor} is out of range 0..{count}"
        )));
    }
    let k = family.dim();
    match family.boundary_scheme() {
        BoundaryScheme::MixtureFaces => Ok((0..=k)
            .filter(|i| descriptor >> i & 1 == 1)
            .map(Face::Weight)
            .collect()),
        BoundaryScheme::BoxFaces => {
            let mut d = descriptor;
            let mut out = Vec::new();
            for i in 0..k {
                match d % 3 {
                    1 => out.push(Face::Lower(i)),
                    2 => out.push(Face::Upper(i)),
                    _ => {}
                }
                d /= 3;
            }
            Ok(out)
        }
        BoundaryScheme::None => unreachable!("descriptor_count rejects families without a scheme"),
    }
}

/// Restricts `family` to the face where the constraints in `active` are
/// tight.
pub fn restrict(family: &FamilyRef, active: &[Face]) -> Result<Restriction> {
    let count = descriptor_count(family.as_ref())?;
    match family.boundary_scheme() {
        BoundaryScheme::MixtureFaces => {
            let mix = family
                .as_mixture()
                .ok_or_else(|| MdlError::Unsupported("mixture faces need a mixture".into()))?;
            let mut pinned: Vec<usize> = active
                .iter()
                .map(|f| match f {
                    Face::Weight(i) => Ok(*i),
                    _ => Err(MdlError::precondition("box face on a mixture")),
                })
                .collect::<Result<_>>()?;
            pinned.sort_unstable();
            pinned.dedup();
            let descriptor = pinned.iter().map(|i| 1u64 << i).sum();
            let (sub, free) = mix.face(&pinned)?;
            Ok(Restriction {
                family: Arc::new(sub),
                embedding: Embedding::Mixture {
                    k: mix.k(),
                    free,
                    tau: mix.tau(),
                },
                active: pinned.into_iter().map(Face::Weight).collect(),
                descriptor,
                descriptor_count: count,
            })
        }
        BoundaryScheme::BoxFaces => {
            let ParamSpace::Box { lo, hi } = family.space() else {
                return Err(MdlError::Unsupported("box faces need a box space".into()));
            };
            let k = lo.len();
            let mut template = vec![f64::NAN; k];
            let mut digits = vec![0u64; k];
            for f in active {
                match f {
                    Face::Lower(i) => {
                        template[*i] = lo[*i];
                        digits[*i] = 1;
                    }
                    Face::Upper(i) => {
                        template[*i] = hi[*i];
                        digits[*i] = 2;
                    }
                    Face::Weight(_) => {
                        return Err(MdlError::precondition("weight face on a box family"))
                    }
                }
            }
            let descriptor = digits.iter().rev().fold(0u64, |acc, d| acc * 3 + d);
            let free: Vec<usize> = (0..k).filter(|&i| digits[i] == 0).collect();
            let sub_space = ParamSpace::new_box(
                free.iter().map(|&i| lo[i]).collect(),
                free.iter().map(|&i| hi[i]).collect(),
            )?;
            let mut active: Vec<Face> = active.to_vec();
            active.sort();
            active.dedup();
            Ok(Restriction {
                family: Arc::new(FaceRestricted {
                    parent: family.clone(),
                    free: free.clone(),
                    template: template.clone(),
                    space: sub_space,
                }),
                embedding: Embedding::Box { template, free },
                active,
                descriptor,
                descriptor_count: count,
            })
        }
        BoundaryScheme::None => unreachable!("descriptor_count rejects families without a scheme"),
    }
}

/// A box family with some coordinates pinned.
#[derive(Debug, Clone)]
pub struct FaceRestricted {
    parent: FamilyRef,
    free: Vec<usize>,
    template: Vec<f64>,
    space: ParamSpace,
}

impl FaceRestricted {
    fn embed(&self, sub: &[f64]) -> Vec<f64> {
        let mut t = self.template.clone();
        for (i, s) in self.free.iter().zip(sub) {
            t[*i] = *s;
        }
        t
    }
}

impl Family for FaceRestricted {
    fn name(&self) -> String {
        format!("{} restricted to {:?}", self.parent.name(), self.free)
    }

    fn space(&self) -> &ParamSpace {
        &self.space
    }

    fn alphabet_size(&self) -> usize {
        self.parent.alphabet_size()
    }

    fn prob(&self, theta: &[f64], x: usize) -> f64 {
        self.parent.prob(&self.embed(theta), x)
    }

    fn is_exponential(&self) -> bool {
        self.parent.is_exponential()
    }

    fn symbol_fisher(&self, theta: &[f64], x: usize) -> Matrix {
        let full = self.parent.symbol_fisher(&self.embed(theta), x);
        let k = self.free.len();
        Matrix::from_fn(k, k, |i, j| full[(self.free[i], self.free[j])])
    }

    fn boundary_scheme(&self) -> BoundaryScheme {
        BoundaryScheme::BoxFaces
    }

    fn analytic_constants(&self) -> Option<crate::models::family::AnalyticConstants> {
        self.parent.analytic_constants()
    }
}
