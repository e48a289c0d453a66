//! Extended-target designs, minimizing `tr(R_s^-1)` through the
//! trace-inverse lift with `R_s = sum W_k + W_r`.

use super::common::{finish, run_ao, run_sca, Design};
use super::model::Model;
use super::{Outcome, SolveOptions};
use crate::error::{Error, Result};
use crate::metrics::TargetMode;
use crate::scenario::Scenario;

const EXTENDED: Design = Design {
    mode: TargetMode::Extended,
    users: true,
};

/// Alternating optimization: block 1 moves the server beam and `f` with the
/// rest of `R_s` fixed, block 2 moves the user beams and the radar part at
/// fixed `f`.
pub fn solve_extended_ao(scn: &Scenario, opts: &SolveOptions) -> Result<Outcome> {
    let model = Model::new(scn)?;
    let run = run_ao(&model, EXTENDED, opts, opts.max_outer)?;
    finish(&model, TargetMode::Extended, run, opts)
}

/// Joint SCA design over all beams, the radar part and `gamma_p`.
pub fn solve_extended_sca(scn: &Scenario, opts: &SolveOptions) -> Result<Outcome> {
    let model = Model::new(scn)?;
    let run = run_sca(&model, EXTENDED, opts)?;
    finish(&model, TargetMode::Extended, run, opts)
}

/// SCA design with only the server beam and the radar part.
pub fn solve_extended_nocomm(scn: &Scenario, opts: &SolveOptions) -> Result<Outcome> {
    if scn.config.sinr_thresholds.iter().any(|&g| g > 0.0) {
        return Err(Error::InvalidArgument(
            "the no-communication design needs K = 0 or all SINR thresholds zero".into(),
        ));
    }
    let model = Model::new(scn)?;
    let design = Design {
        mode: TargetMode::Extended,
        users: false,
    };
    let run = run_sca(&model, design, opts)?;
    finish(&model, TargetMode::Extended, run, opts)
}
