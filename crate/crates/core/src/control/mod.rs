//! Classical control baselines: the PID basal controller, the mealtime bolus
//! calculator, exhaustive PID grid search and Ornstein-Uhlenbeck exploration
//! noise.

mod bolus;
mod ou;
mod pid;
mod pidfile;
mod tune;

pub use bolus::{bolus_dose, BOLUS_TARGET_MG_DL, CORRECTION_LOOKBACK_STEPS};
pub use ou::{ou_step, OuParams, OuProcess};
pub use pid::{pid_step, PidController, PidParams, PidState};
pub use pidfile::{load_pid_file, parse_pid_file, render_pid_file, PidFile, RankedPid, PID_FILE_VERSION};
pub use tune::{pid_rollout_reward, rank_pid_grid, tune_pid, GridSpec};
