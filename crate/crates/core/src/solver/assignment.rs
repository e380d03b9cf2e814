use crate::dims::Dims;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Users selected on one subchannel, ascending.
pub type Selection = Vec<usize>;

/// Binary user-to-subchannel association `x_ij` meeting both quotas:
/// every user on exactly one subchannel, every subchannel carrying exactly
/// `A` users.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    dims: Dims,
    /// Subchannel (0-based) of each user.
    channel_of: Vec<usize>,
}

impl Assignment {
    /// Validates a 0/1 matrix given row-major as `M x N` bytes.
    pub fn from_matrix(dims: Dims, x: &Matrix<u8>) -> Result<Self> {
        dims.validate()?;
        if x.rows() != dims.users || x.cols() != dims.subchannels {
            return Err(Error::Dimension(format!("{}x{} matrix for {dims}", x.rows(), x.cols())));
        }
        if let Some(v) = x.iter().find(|&&v| v > 1) {
            return Err(Error::Encoding(format!("non-binary entry {v}")));
        }
        let mut channel_of = Vec::with_capacity(dims.users);
        for i in 0..dims.users {
            let ones: Vec<usize> = (0..dims.subchannels).filter(|&j| x[(i, j)] == 1).collect();
            match ones.as_slice() {
                [j] => channel_of.push(*j),
                _ => {
                    return Err(Error::Encoding(format!(
                        "user {} occupies {} subchannels, expected exactly one",
                        i + 1,
                        ones.len()
                    )))
                }
            }
        }
        Self::from_channels(dims, channel_of).map_err(|e| match e {
            Error::Decoding(m) => Error::Encoding(m),
            other => other,
        })
    }

    /// Builds from 0-based per-user subchannel indices.
    pub fn from_channels(dims: Dims, channel_of: Vec<usize>) -> Result<Self> {
        dims.validate()?;
        if channel_of.len() != dims.users {
            return Err(Error::Dimension(format!("{} users for {dims}", channel_of.len())));
        }
        let mut load = vec![0usize; dims.subchannels];
        for &j in &channel_of {
            if j >= dims.subchannels {
                return Err(Error::Decoding(format!("subchannel {} out of range for {dims}", j + 1)));
            }
            load[j] += 1;
        }
        if let Some(j) = load.iter().position(|&c| c != dims.quota) {
            return Err(Error::Decoding(format!(
                "subchannel {} carries {} users, quota is {}",
                j + 1,
                load[j],
                dims.quota
            )));
        }
        Ok(Self { dims, channel_of })
    }

    /// Builds from per-subchannel user selections; each user must appear once.
    pub fn from_selections(dims: Dims, selections: &[Selection]) -> Result<Self> {
        if selections.len() != dims.subchannels {
            return Err(Error::Dimension(format!("{} selections for {dims}", selections.len())));
        }
        let mut channel_of = vec![usize::MAX; dims.users];
        for (j, sel) in selections.iter().enumerate() {
            for &i in sel {
                if i >= dims.users {
                    return Err(Error::Dimension(format!("user {} out of range", i + 1)));
                }
                if channel_of[i] != usize::MAX {
                    return Err(Error::Decoding(format!("user {} selected twice", i + 1)));
                }
                channel_of[i] = j;
            }
        }
        if let Some(i) = channel_of.iter().position(|&j| j == usize::MAX) {
            return Err(Error::Decoding(format!("user {} unassigned", i + 1)));
        }
        Self::from_channels(dims, channel_of)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// 0-based subchannel of user `i`.
    pub fn channel_of(&self, i: usize) -> usize {
        self.channel_of[i]
    }

    pub fn channels(&self) -> &[usize] {
        &self.channel_of
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.channel_of[i] == j
    }

    /// Users on subchannel `j`, ascending.
    pub fn users_on(&self, j: usize) -> Selection {
        (0..self.dims.users).filter(|&i| self.channel_of[i] == j).collect()
    }

    pub fn selections(&self) -> Vec<Selection> {
        (0..self.dims.subchannels).map(|j| self.users_on(j)).collect()
    }

    pub fn to_matrix<T: Copy + num_traits::Zero + num_traits::One>(&self) -> Matrix<T> {
        let mut m = Matrix::filled(self.dims.users, self.dims.subchannels, T::zero());
        for (i, &j) in self.channel_of.iter().enumerate() {
            m[(i, j)] = T::one();
        }
        m
    }

    /// Row `i` of the result is row `perm[i]` of `self`.
    pub fn permute_users(&self, perm: &[usize]) -> Self {
        Self { dims: self.dims, channel_of: perm.iter().map(|&p| self.channel_of[p]).collect() }
    }
}

/// Per-user occupancy counts `sum_j x_ij` of a set of selections.
pub fn occupancy(users: usize, selections: &[Selection]) -> Vec<usize> {
    let mut counts = vec![0usize; users];
    for sel in selections {
        for &i in sel {
            counts[i] += 1;
        }
    }
    counts
}
