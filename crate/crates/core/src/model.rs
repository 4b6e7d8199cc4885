//! Fully-connected ReLU networks, their node maps, and the affine form each node map
//! takes on a fixed activation region.
//!
//! Node maps are numbered layer-major, unit-ascending: the first `n_1` flat indices
//! are the first hidden layer, and the last flat index is the scalar output map.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signs::SignSequence;

/// One affine map `x ↦ W x + b`. Row `r` of `weights` is the incoming vector of unit `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLayer {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl AffineLayer {
    pub fn new(weights: DMatrix<f64>, bias: DVector<f64>) -> Self {
        assert_eq!(weights.nrows(), bias.len(), "bias length must match weight rows");
        AffineLayer { weights, bias }
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }
}

/// Position of a node map: `layer` and `unit` are 1-based, `flat` is 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeIndex {
    pub layer: usize,
    pub unit: usize,
    pub flat: usize,
}

/// `x ↦ normal · x + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFunctional {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl AffineFunctional {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.offset
    }
}

/// Affine forms of every node map through some layer, stacked as rows.
#[derive(Debug, Clone)]
pub struct RegionMaps {
    pub normals: DMatrix<f64>,
    pub offsets: DVector<f64>,
}

impl RegionMaps {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn eval(&self, node: usize, x: &DVector<f64>) -> f64 {
        self.normals.row(node).dot(&x.transpose()) + self.offsets[node]
    }

    pub fn functional(&self, node: usize) -> AffineFunctional {
        AffineFunctional { normal: self.normals.row(node).iter().copied().collect(), offset: self.offsets[node] }
    }
}

fn validate_architecture(architecture: &[usize]) -> Result<()> {
    if architecture.len() < 3 {
        return Err(Error::InvalidArchitecture(format!(
            "{architecture:?} needs an input size, at least one hidden layer and an output"
        )));
    }
    if architecture.contains(&0) {
        return Err(Error::InvalidArchitecture(format!("{architecture:?} has an empty layer")));
    }
    if *architecture.last().unwrap() != 1 {
        return Err(Error::InvalidArchitecture(format!("{architecture:?} must end in a single output unit")));
    }
    Ok(())
}

/// A fully-connected ReLU network with architecture `(n_0, n_1, …, n_m, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluNetwork {
    architecture: Vec<usize>,
    layers: Vec<AffineLayer>,
    /// `offsets[t]` is the flat index of the first node map of layer `t + 1`.
    offsets: Vec<usize>,
}

impl ReluNetwork {
    pub fn new(layers: Vec<AffineLayer>) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::InvalidArchitecture("no layers".into()))?;
        let mut architecture = vec![first.inputs()];
        for (t, layer) in layers.iter().enumerate() {
            if layer.inputs() != *architecture.last().unwrap() {
                return Err(Error::InvalidModel {
                    field: format!("layers[{t}].weights"),
                    reason: format!("expected {} columns, found {}", architecture.last().unwrap(), layer.inputs()),
                });
            }
            architecture.push(layer.outputs());
        }
        validate_architecture(&architecture)?;
        let mut offsets = Vec::with_capacity(layers.len() + 1);
        let mut acc = 0;
        for &n in &architecture[1..] {
            offsets.push(acc);
            acc += n;
        }
        offsets.push(acc);
        Ok(ReluNetwork { architecture, layers, offsets })
    }

    /// Draws every weight and bias i.i.d. from a standard normal, using a ChaCha8
    /// stream seeded with `seed`. Entries are drawn layer by layer, weights row-major
    /// then bias.
    pub fn random_init(architecture: &[usize], seed: u64) -> Result<Self> {
        validate_architecture(architecture)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = architecture
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
                let weights = DMatrix::from_row_iterator(
                    fan_out,
                    fan_in,
                    (0..fan_in * fan_out).map(|_| draw()).collect::<Vec<_>>(),
                );
                let bias = DVector::from_iterator(fan_out, (0..fan_out).map(|_| draw()));
                AffineLayer::new(weights, bias)
            })
            .collect();
        ReluNetwork::new(layers)
    }

    pub fn architecture(&self) -> &[usize] {
        &self.architecture
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.architecture[0]
    }

    /// Number of affine layers, including the output map (`m + 1`).
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Total number of node maps `N`.
    pub fn node_count(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Flat index range of the node maps of `layer` (1-based).
    pub fn layer_nodes(&self, layer: usize) -> std::ops::Range<usize> {
        self.offsets[layer - 1]..self.offsets[layer]
    }

    pub fn output_node(&self) -> usize {
        self.node_count() - 1
    }

    pub fn node_index(&self, flat: usize) -> NodeIndex {
        assert!(flat < self.node_count());
        let layer = self.offsets.partition_point(|&o| o <= flat);
        NodeIndex { layer, unit: flat - self.offsets[layer - 1] + 1, flat }
    }

    /// Pre-activation of every node map at `x`, in flat order; the last entry is `F(x)`.
    pub fn node_map_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        let mut values = Vec::with_capacity(self.node_count());
        let mut h = DVector::from_column_slice(x);
        for layer in &self.layers {
            let z = &layer.weights * &h + &layer.bias;
            values.extend(z.iter().copied());
            h = z.map(|v| v.max(0.0));
        }
        Ok(values)
    }

    /// Network output `F(x)`.
    pub fn output(&self, x: &[f64]) -> Result<f64> {
        Ok(*self.node_map_values(x)?.last().unwrap())
    }

    /// Affine forms of every node map of layers `1..=upto_layer` on the region whose
    /// signs on layers `< upto_layer` are given by `region_signs` (extra entries are ignored).
    pub fn region_maps(&self, region_signs: &SignSequence, upto_layer: usize) -> Result<RegionMaps> {
        assert!((1..=self.depth()).contains(&upto_layer));
        let needed = self.offsets[upto_layer - 1];
        if region_signs.len() < needed {
            return Err(Error::DimensionMismatch { expected: needed, got: region_signs.len() });
        }
        let n0 = self.input_dim();
        let total = self.offsets[upto_layer];
        let mut normals = DMatrix::zeros(total, n0);
        let mut offsets = DVector::zeros(total);
        // Current hidden activation as an affine map of the input.
        let mut lin = DMatrix::<f64>::identity(n0, n0);
        let mut shift = DVector::<f64>::zeros(n0);
        for (t, layer) in self.layers[..upto_layer].iter().enumerate() {
            let z_lin = &layer.weights * &lin;
            let z_shift = &layer.weights * &shift + &layer.bias;
            let base = self.offsets[t];
            normals.rows_mut(base, z_lin.nrows()).copy_from(&z_lin);
            offsets.rows_mut(base, z_shift.len()).copy_from(&z_shift);
            if t + 1 < upto_layer {
                lin = z_lin;
                shift = z_shift;
                for r in 0..layer.outputs() {
                    match region_signs.get(base + r) {
                        1 => {}
                        -1 => {
                            lin.row_mut(r).fill(0.0);
                            shift[r] = 0.0;
                        }
                        _ => return Err(Error::NotARegion { index: base + r }),
                    }
                }
            }
        }
        Ok(RegionMaps { normals, offsets })
    }

    /// [`region_maps`](Self::region_maps) as a list of functionals.
    pub fn region_affine_maps(&self, region_signs: &SignSequence, upto_layer: usize) -> Result<Vec<AffineFunctional>> {
        let maps = self.region_maps(region_signs, upto_layer)?;
        Ok((0..maps.len()).map(|i| maps.functional(i)).collect())
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            architecture: self.architecture.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    weights: l.weights.row_iter().map(|r| r.iter().copied().collect()).collect(),
                    bias: l.bias.iter().copied().collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.into_network()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// On-disk model: `{"architecture": [...], "layers": [{"weights": [[...]], "bias": [...]}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub architecture: Vec<usize>,
    pub layers: Vec<LayerFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl ModelFile {
    pub fn into_network(self) -> Result<ReluNetwork> {
        let invalid = |field: String, reason: String| Error::InvalidModel { field, reason };
        validate_architecture(&self.architecture)?;
        if self.layers.len() + 1 != self.architecture.len() {
            return Err(invalid(
                "layers".into(),
                format!(
                    "architecture {:?} needs {} layers, found {}",
                    self.architecture,
                    self.architecture.len() - 1,
                    self.layers.len()
                ),
            ));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for (t, layer) in self.layers.into_iter().enumerate() {
            let (fan_in, fan_out) = (self.architecture[t], self.architecture[t + 1]);
            if layer.weights.len() != fan_out {
                return Err(invalid(
                    format!("layers[{t}].weights"),
                    format!("expected {fan_out} rows, found {}", layer.weights.len()),
                ));
            }
            if let Some((r, row)) = layer.weights.iter().enumerate().find(|(_, r)| r.len() != fan_in) {
                return Err(invalid(
                    format!("layers[{t}].weights[{r}]"),
                    format!("expected {fan_in} entries, found {}", row.len()),
                ));
            }
            if layer.bias.len() != fan_out {
                return Err(invalid(
                    format!("layers[{t}].bias"),
                    format!("expected {fan_out} entries, found {}", layer.bias.len()),
                ));
            }
            let flat: Vec<f64> = layer.weights.into_iter().flatten().collect();
            if flat.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(invalid(format!("layers[{t}]"), "non-finite parameter".into()));
            }
            layers
                .push(AffineLayer::new(DMatrix::from_row_slice(fan_out, fan_in, &flat), DVector::from_vec(layer.bias)));
        }
        ReluNetwork::new(layers)
    }
}
