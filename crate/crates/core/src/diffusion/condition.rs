use crate::error::Result;
use crate::volumes::Slice;

/// Channel index of the noisy image in the network input.
pub const CHANNEL_XT: usize = 0;
/// Channel index of the anatomical prior.
pub const CHANNEL_PRIOR: usize = 1;

/// Two-channel network input: `[x_t, y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionStack {
    width: usize,
    height: usize,
    /// Channel-major, row-major within a channel.
    data: Vec<f64>,
}

pub fn make_condition_input(x_t: &Slice, y: &Slice) -> Result<ConditionStack> {
    x_t.check_same_shape(y)?;
    let mut data = Vec::with_capacity(2 * x_t.data().len());
    data.extend_from_slice(x_t.data());
    data.extend_from_slice(y.data());
    Ok(ConditionStack {
        width: x_t.width(),
        height: x_t.height(),
        data,
    })
}

impl ConditionStack {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Both channels, `CHANNEL_XT` first.
    pub fn as_channels(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn unstack(&self) -> (Slice, Slice) {
        let part = |c| Slice::from_vec(self.width, self.height, self.channel(c).to_vec()).expect("shape");
        (part(CHANNEL_XT), part(CHANNEL_PRIOR))
    }
}
