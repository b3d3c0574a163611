use serde::{Deserialize, Serialize};

use super::{AutomatonError, Result};
use crate::conedoff::Word;
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub name: String,
    pub matrix: Matrix,
    pub inverse: Matrix,
}

/// A peripheral subgroup given by generating words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peripheral {
    pub name: String,
    pub generators: Vec<Word>,
    pub matrices: Vec<Matrix>,
    /// Number of elements of each cofinite family that are checked.
    pub truncation: usize,
    pub abelian: bool,
}

/// Generators as matrices, plus declared peripheral subgroups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPresentation {
    dim: usize,
    generators: Vec<Generator>,
    peripherals: Vec<Peripheral>,
}

const PROJECTIVE_TOL: f64 = 1e-9;

impl GroupPresentation {
    pub fn new(dim: usize, generators: Vec<(String, Matrix)>) -> Result<Self> {
        let mut gens: Vec<Generator> = Vec::with_capacity(generators.len());
        for (name, matrix) in generators {
            if matrix.dim() != dim {
                return Err(AutomatonError::InvalidPresentation(format!(
                    "generator {name} has dimension {}, expected {dim}",
                    matrix.dim()
                )));
            }
            if name.is_empty() || gens.iter().any(|g| g.name == name) {
                return Err(AutomatonError::InvalidPresentation(format!(
                    "generator name {name:?} is empty or repeated"
                )));
            }
            let inverse = matrix.inverse()?;
            gens.push(Generator { name, matrix, inverse });
        }
        Ok(Self {
            dim,
            generators: gens,
            peripherals: Vec::new(),
        })
    }

    /// Declares a peripheral subgroup; abelian ones must have commuting
    /// generators.
    pub fn add_peripheral(
        &mut self,
        name: &str,
        words: Vec<Word>,
        truncation: usize,
        abelian: bool,
    ) -> Result<usize> {
        if words.is_empty() {
            return Err(AutomatonError::InvalidPresentation(format!(
                "peripheral {name} has no generators"
            )));
        }
        let matrices = words
            .iter()
            .map(|w| self.evaluate(w))
            .collect::<Result<Vec<_>>>()?;
        if abelian {
            for i in 0..matrices.len() {
                for j in i + 1..matrices.len() {
                    let ab = matrices[i].mul(&matrices[j])?;
                    let ba = matrices[j].mul(&matrices[i])?;
                    if ab.projective_diff(&ba) > PROJECTIVE_TOL {
                        return Err(AutomatonError::InvalidPresentation(format!(
                            "peripheral {name} is declared abelian but its generators do not commute"
                        )));
                    }
                }
            }
        }
        self.peripherals.push(Peripheral {
            name: name.to_string(),
            generators: words,
            matrices,
            truncation,
            abelian,
        });
        Ok(self.peripherals.len() - 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn peripherals(&self) -> &[Peripheral] {
        &self.peripherals
    }

    pub fn names(&self) -> Vec<String> {
        self.generators.iter().map(|g| g.name.clone()).collect()
    }

    pub fn generator_index(&self, name: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.name == name)
    }

    pub fn letter_matrix(&self, letter: i32) -> Result<&Matrix> {
        let idx = letter.unsigned_abs() as usize;
        let g = self
            .generators
            .get(idx.wrapping_sub(1))
            .ok_or_else(|| AutomatonError::Evaluation(format!("no generator for letter {letter}")))?;
        Ok(if letter > 0 { &g.matrix } else { &g.inverse })
    }

    /// `ρ(w)`, rescaled by the sup norm every 8 factors when inexact.
    pub fn evaluate(&self, w: &Word) -> Result<Matrix> {
        let mut acc = Matrix::identity(self.dim);
        for (i, &l) in w.letters().iter().enumerate() {
            acc = acc.mul(self.letter_matrix(l)?)?;
            if i % 8 == 7 && !acc.is_exact() {
                acc = acc.sup_normalize().0;
            }
        }
        Ok(acc)
    }

    pub fn parse_word(&self, text: &str) -> Result<Word> {
        Word::parse(text, &self.names()).map_err(|e| AutomatonError::Evaluation(e.to_string()))
    }

    pub fn display_word(&self, w: &Word) -> String {
        w.display(&self.names())
    }

    /// Largest projective defect of `g · g⁻¹` from the identity.
    pub fn inverse_defect(&self) -> f64 {
        let id = Matrix::identity(self.dim);
        self.generators
            .iter()
            .map(|g| g.matrix.mul(&g.inverse).map(|m| m.projective_diff(&id)).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    /// Same names and peripheral words with new generator matrices.
    pub fn with_matrices(&self, matrices: Vec<Matrix>) -> Result<Self> {
        if matrices.len() != self.generators.len() {
            return Err(AutomatonError::InvalidPresentation(format!(
                "expected {} matrices, got {}",
                self.generators.len(),
                matrices.len()
            )));
        }
        let mut out = Self::new(
            self.dim,
            self.generators.iter().map(|g| g.name.clone()).zip(matrices).collect(),
        )?;
        for p in &self.peripherals {
            out.add_peripheral(&p.name, p.generators.clone(), p.truncation, p.abelian)?;
        }
        Ok(out)
    }
}
