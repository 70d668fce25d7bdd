//! Vector-space view of solver states, shared by the minimizers and monitors.

use std::sync::Arc;

use crate::grid::{ComplexField, Field, Grid, NkgState, RealField, Scalar};

/// A state that can be combined linearly and measured with the quadrature
/// inner product (`Re ∫ f·conj(g)`, summed over components).
pub trait StateVector: Clone + Send + Sync {
    fn grid(&self) -> &Arc<Grid>;
    fn dot(&self, other: &Self) -> f64;
    fn axpy(&mut self, alpha: f64, x: &Self);
    fn scale(&mut self, alpha: f64);
    fn zeros_like(&self) -> Self;
    fn is_finite(&self) -> bool;

    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl<T: Scalar> StateVector for Field<T> {
    fn grid(&self) -> &Arc<Grid> {
        Field::grid(self)
    }
    fn dot(&self, other: &Self) -> f64 {
        Field::dot(self, other)
    }
    fn axpy(&mut self, alpha: f64, x: &Self) {
        Field::axpy(self, alpha, x)
    }
    fn scale(&mut self, alpha: f64) {
        Field::scale(self, alpha)
    }
    fn zeros_like(&self) -> Self {
        Field::zeros(Field::grid(self))
    }
    fn is_finite(&self) -> bool {
        Field::is_finite(self)
    }
}

impl StateVector for NkgState {
    fn grid(&self) -> &Arc<Grid> {
        self.psi.grid()
    }
    fn dot(&self, other: &Self) -> f64 {
        self.psi.dot(&other.psi) + self.psi_hat.dot(&other.psi_hat)
    }
    fn axpy(&mut self, alpha: f64, x: &Self) {
        self.psi.axpy(alpha, &x.psi);
        self.psi_hat.axpy(alpha, &x.psi_hat);
    }
    fn scale(&mut self, alpha: f64) {
        self.psi.scale(alpha);
        self.psi_hat.scale(alpha);
    }
    fn zeros_like(&self) -> Self {
        NkgState::zeros(self.psi.grid())
    }
    fn is_finite(&self) -> bool {
        NkgState::is_finite(self)
    }
}

/// Any state the workflows pass around.
#[derive(Clone, Debug, PartialEq)]
pub enum State {
    /// Real profile of an NSE ground state or reduced vortex.
    Real(RealField),
    /// Complex NSE wave function.
    Complex(ComplexField),
    Nkg(NkgState),
}

impl State {
    pub fn grid(&self) -> &Arc<Grid> {
        match self {
            State::Real(f) => f.grid(),
            State::Complex(f) => f.grid(),
            State::Nkg(s) => s.psi.grid(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            State::Real(_) => "real",
            State::Complex(_) => "complex",
            State::Nkg(_) => "nkg",
        }
    }
}

impl From<RealField> for State {
    fn from(f: RealField) -> Self {
        State::Real(f)
    }
}

impl From<ComplexField> for State {
    fn from(f: ComplexField) -> Self {
        State::Complex(f)
    }
}

impl From<NkgState> for State {
    fn from(s: NkgState) -> Self {
        State::Nkg(s)
    }
}
