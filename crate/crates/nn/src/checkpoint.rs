//! Plain-text network checkpoints.
//!
//! Line 1 is the component tag, line 2 the architecture descriptor, then one
//! line per layer holding the weights followed by the biases as
//! comma-separated floats (empty for parameter-free layers). Any remaining
//! lines are free-form metadata kept verbatim.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::network::{Layer, LayerSpec, Network};
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub tag: String,
    pub network: Network,
    pub metadata: Vec<String>,
}

impl Checkpoint {
    pub fn new(tag: &str, network: Network, metadata: Vec<String>) -> Self {
        Self {
            tag: tag.to_string(),
            network,
            metadata,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.tag);
        let _ = writeln!(out, "{}", self.network.descriptor());
        for layer in self.network.layers() {
            let values: Vec<String> = [&layer.weight, &layer.bias]
                .into_iter()
                .flatten()
                .flat_map(|t| t.data().iter().map(|v| v.to_string()))
                .collect();
            let _ = writeln!(out, "{}", values.join(","));
        }
        for line in &self.metadata {
            let _ = writeln!(out, "{line}");
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < 2 {
            return Err(err(lines.len() + 1, "checkpoint needs a tag and a descriptor".into()));
        }
        let tag = lines[0].trim().to_string();
        let (input_shape, specs) = Network::parse_descriptor(lines[1]).map_err(|m| err(2, m))?;
        if lines.len() < 2 + specs.len() {
            return Err(err(lines.len() + 1, format!("expected {} layer lines", specs.len())));
        }
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let line_no = i + 3;
            let line = lines[2 + i].trim();
            let dims = match *spec {
                LayerSpec::Dense { inputs, outputs, .. } => Some((inputs, outputs)),
                LayerSpec::Conv1d { channels, filters, kernel, .. } => Some((kernel * channels, filters)),
                LayerSpec::MaxPool | LayerSpec::Flatten => None,
            };
            let Some((fan_in, out)) = dims else {
                if !line.is_empty() {
                    return Err(err(line_no, "parameter-free layer must have an empty line".into()));
                }
                layers.push(Layer { spec: *spec, weight: None, bias: None });
                continue;
            };
            let values = line
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| err(line_no, format!("bad number {v:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != fan_in * out + out {
                return Err(err(
                    line_no,
                    format!("expected {} values, found {}", fan_in * out + out, values.len()),
                ));
            }
            let (w, b) = values.split_at(fan_in * out);
            layers.push(Layer {
                spec: *spec,
                weight: Some(Tensor::matrix(fan_in, out, w.to_vec())?),
                bias: Some(Tensor::matrix(1, out, b.to_vec())?),
            });
        }
        let network = Network::from_layers(&input_shape, layers).map_err(|e| err(2, e.to_string()))?;
        let metadata = lines[2 + specs.len()..].iter().map(|l| l.to_string()).collect();
        Ok(Self { tag, network, metadata })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text, path)
    }
}

/// Hex SHA-256 digest of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Activation;

    #[test]
    fn save_load_reproduces_outputs_bit_for_bit() {
        let dir = std::env::temp_dir().join(format!("ckpt-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("net.ckpt");
        let net = Network::new(
            &[12, 2],
            &[
                LayerSpec::Conv1d { channels: 2, filters: 3, kernel: 3, activation: Activation::Relu },
                LayerSpec::MaxPool,
                LayerSpec::Flatten,
                LayerSpec::Dense { inputs: 15, outputs: 2, activation: Activation::Sigmoid },
            ],
            5,
        )
        .unwrap();
        let ck = Checkpoint::new("identifier", net, vec!["norm.voltage = 2.0,3.6".into()]);
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        let x = Tensor::new(vec![3, 12, 2], (0..72).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        assert_eq!(back.network.forward(&x).unwrap(), ck.network.forward(&x).unwrap());
        let h1 = file_sha256(&path).unwrap();
        ck.save(&path).unwrap();
        assert_eq!(file_sha256(&path).unwrap(), h1);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn malformed_layer_line_reports_its_number() {
        let text = "soh_head\ninput(2);dense(2,1,sigmoid)\n0.1,0.2\n";
        match Checkpoint::parse(text, Path::new("x.ckpt")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
