use super::{ChanError, Result};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Physical constants of one simulated deployment. Powers in W, lengths in m.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Path loss at the 1 m reference distance (linear).
    pub c0: f64,
    pub alpha: f64,
    pub num_paths: usize,
    pub pt: f64,
    pub sigma2: f64,
    /// RIS amplification power (linear).
    pub amp_ae: f64,
    pub mx: usize,
    pub my: usize,
    pub elem_spacing: f64,
    pub wavelength: f64,
}

impl SystemParams {
    /// 40x40 array with C0 = -30 dB, alpha = 3, L = 10, Pt = 0.1 W, A_E = 40 dB.
    pub fn paper() -> Self {
        let wavelength = 0.1;
        Self {
            c0: db_to_linear(-30.0),
            alpha: 3.0,
            num_paths: 10,
            pt: 0.1,
            sigma2: db_to_linear(-110.0),
            amp_ae: db_to_linear(40.0),
            mx: 40,
            my: 40,
            elem_spacing: wavelength / 4.0,
            wavelength,
        }
    }

    /// Same constants on a 4x4 array at sigma2 = -115 dBW.
    pub fn desk() -> Self {
        Self {
            mx: 4,
            my: 4,
            sigma2: db_to_linear(-115.0),
            ..Self::paper()
        }
    }

    pub fn m(&self) -> usize {
        self.mx * self.my
    }

    pub fn with_sigma2_dbw(mut self, dbw: f64) -> Self {
        self.sigma2 = db_to_linear(dbw);
        self
    }

    pub fn with_array(mut self, mx: usize, my: usize) -> Self {
        self.mx = mx;
        self.my = my;
        self
    }

    /// Checks every invariant. `sigma2 = 0` is accepted for noiseless studies.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ChanError::InvalidParam(m.to_string()));
        if !(self.c0 > 0.0) || !self.c0.is_finite() {
            return bad("c0 must be positive");
        }
        if !(2.0..=4.0).contains(&self.alpha) {
            return bad("alpha must lie in [2, 4]");
        }
        if self.num_paths == 0 {
            return bad("num_paths must be at least 1");
        }
        if !(self.pt > 0.0) || !self.pt.is_finite() {
            return bad("pt must be positive");
        }
        if !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return bad("sigma2 must be non-negative");
        }
        if !(self.amp_ae >= 1.0) || !self.amp_ae.is_finite() {
            return bad("amp_ae must be at least 1");
        }
        if self.mx == 0 || self.my == 0 {
            return bad("array dimensions must be at least 1");
        }
        if !(self.elem_spacing > 0.0) || !(self.wavelength > 0.0) {
            return bad("element spacing and wavelength must be positive");
        }
        Ok(())
    }
}
