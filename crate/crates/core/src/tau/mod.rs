//! Hyperkähler 2-forms, potentials on the r = 0 Lagrangian and the tau function along flows.

mod flow;
mod forms;

pub use flow::{dlogtau_dt, tau_along_flow, tau_detour_fits, tau_zero_pole_match, TauRun, TauSample, TauZeroMatch};
pub use forms::{
    chart_coords, chart_names, chart_point, closedness_defect, dlogtau, dlogtau_closed_form, euler_field, exterior_derivative_fd,
    omega_forms, omega_forms_canonical, theta_potentials, DLogTau, FockGoncharovTerm, FormKind, OneForm, TwoForm,
};
