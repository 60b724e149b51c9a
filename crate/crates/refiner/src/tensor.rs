use crate::real::Real;

/// Dense CHW tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![T::ZERO; c * h * w],
        }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), c * h * w);
        Self { c, h, w, data }
    }

    #[inline]
    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    #[inline]
    pub fn channel(&self, c: usize) -> &[T] {
        &self.data[c * self.plane()..(c + 1) * self.plane()]
    }

    #[inline]
    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        let p = self.plane();
        &mut self.data[c * p..(c + 1) * p]
    }

    /// Concatenate along channels; spatial dims must match.
    pub fn concat(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
        assert_eq!((a.h, a.w), (b.h, b.w), "concat spatial mismatch");
        let mut data = Vec::with_capacity((a.c + b.c) * a.plane());
        data.extend_from_slice(&a.data);
        data.extend_from_slice(&b.data);
        Tensor {
            c: a.c + b.c,
            h: a.h,
            w: a.w,
            data,
        }
    }

    /// Split a gradient of a concatenation back into the two parts.
    pub fn split(&self, c_first: usize) -> (Tensor<T>, Tensor<T>) {
        let p = self.plane();
        let first = Tensor {
            c: c_first,
            h: self.h,
            w: self.w,
            data: self.data[..c_first * p].to_vec(),
        };
        let second = Tensor {
            c: self.c - c_first,
            h: self.h,
            w: self.w,
            data: self.data[c_first * p..].to_vec(),
        };
        (first, second)
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn add(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
        let mut out = a.clone();
        out.add_assign(b);
        out
    }
}
