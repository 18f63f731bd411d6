use std::fmt;

use crate::error::{Error, Result};

/// A single layer of a feed-forward classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Dense {
        input: usize,
        output: usize,
    },
    /// Valid (unpadded) 2-D convolution over `[channels, height, width]`.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    Relu,
    Flatten,
}

impl Layer {
    pub fn param_count(&self) -> usize {
        match *self {
            Layer::Dense { input, output } => input * output + output,
            Layer::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => out_channels * in_channels * kernel * kernel + out_channels,
            Layer::Relu | Layer::Flatten => 0,
        }
    }

    /// Fan-in used for the `±1/√fan_in` initialization range.
    pub fn fan_in(&self) -> usize {
        match *self {
            Layer::Dense { input, .. } => input,
            Layer::Conv2d {
                in_channels,
                kernel,
                ..
            } => in_channels * kernel * kernel,
            Layer::Relu | Layer::Flatten => 0,
        }
    }

    /// Output shape for a given input shape.
    pub fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        match *self {
            Layer::Dense { input, output } => {
                if input_shape != [input] {
                    return Err(Error::Shape {
                        expected: vec![input],
                        got: input_shape.to_vec(),
                    });
                }
                Ok(vec![output])
            }
            Layer::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => {
                let ok = input_shape.len() == 3
                    && input_shape[0] == in_channels
                    && input_shape[1] >= kernel
                    && input_shape[2] >= kernel
                    && kernel > 0
                    && stride > 0;
                if !ok {
                    return Err(Error::Shape {
                        expected: vec![in_channels, kernel, kernel],
                        got: input_shape.to_vec(),
                    });
                }
                let h = (input_shape[1] - kernel) / stride + 1;
                let w = (input_shape[2] - kernel) / stride + 1;
                Ok(vec![out_channels, h, w])
            }
            Layer::Relu => Ok(input_shape.to_vec()),
            Layer::Flatten => Ok(vec![input_shape.iter().product()]),
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layer::Dense { input, output } => write!(f, "dense({input}->{output})"),
            Layer::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => write!(f, "conv2d({in_channels}->{out_channels},k{kernel},s{stride})"),
            Layer::Relu => write!(f, "relu"),
            Layer::Flatten => write!(f, "flatten"),
        }
    }
}

/// Layer stack plus input shape and class count, validated so that every
/// layer's shape composes with the next and the last emits `classes` logits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelArch {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    classes: usize,
    /// Shape entering each layer, followed by the output shape.
    shapes: Vec<Vec<usize>>,
}

impl ModelArch {
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>, classes: usize) -> Result<Self> {
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::domain(format!("bad input shape {input_shape:?}")));
        }
        if classes == 0 {
            return Err(Error::domain("class count must be positive"));
        }
        let mut shapes = vec![input_shape.clone()];
        for layer in &layers {
            let next = layer.output_shape(shapes.last().unwrap())?;
            shapes.push(next);
        }
        if shapes.last().unwrap() != &[classes] {
            return Err(Error::Shape {
                expected: vec![classes],
                got: shapes.last().unwrap().clone(),
            });
        }
        Ok(ModelArch {
            input_shape,
            layers,
            classes,
            shapes,
        })
    }

    /// `dense(dim→hidden) → relu → dense(hidden→classes)`.
    pub fn mlp(dim: usize, hidden: usize, classes: usize) -> Result<Self> {
        ModelArch::new(
            vec![dim],
            vec![
                Layer::Dense {
                    input: dim,
                    output: hidden,
                },
                Layer::Relu,
                Layer::Dense {
                    input: hidden,
                    output: classes,
                },
            ],
            classes,
        )
    }

    /// `conv2d(c→8, k3, s2) → relu → flatten → dense(→classes)`.
    pub fn small_convnet(channels: usize, height: usize, width: usize, classes: usize) -> Result<Self> {
        let conv = Layer::Conv2d {
            in_channels: channels,
            out_channels: 8,
            kernel: 3,
            stride: 2,
        };
        let conv_out = conv.output_shape(&[channels, height, width])?;
        let flat: usize = conv_out.iter().product();
        ModelArch::new(
            vec![channels, height, width],
            vec![
                conv,
                Layer::Relu,
                Layer::Flatten,
                Layer::Dense {
                    input: flat,
                    output: classes,
                },
            ],
            classes,
        )
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub(crate) fn layer_input_shape(&self, index: usize) -> &[usize] {
        &self.shapes[index]
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }
}

impl fmt::Display for ModelArch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "input{:?}", self.input_shape)?;
        for layer in &self.layers {
            write!(f, " -> {layer}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlp_param_count() {
        let arch = ModelArch::mlp(64, 32, 2).unwrap();
        assert_eq!(arch.param_count(), 64 * 32 + 32 + 32 * 2 + 2);
    }

    #[test]
    fn convnet_shapes() {
        let arch = ModelArch::small_convnet(1, 28, 28, 10).unwrap();
        assert_eq!(arch.layer_input_shape(1), &[8, 13, 13]);
        assert_eq!(arch.param_count(), 8 * 9 + 8 + 1352 * 10 + 10);
    }

    #[test]
    fn mismatched_layers_rejected() {
        let bad = ModelArch::new(
            vec![4],
            vec![Layer::Dense { input: 5, output: 2 }],
            2,
        );
        assert!(matches!(bad, Err(Error::Shape { .. })));
        let wrong_classes = ModelArch::new(vec![4], vec![Layer::Dense { input: 4, output: 3 }], 2);
        assert!(wrong_classes.is_err());
    }
}
