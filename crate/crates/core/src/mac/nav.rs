use crate::params::NavPolicy;
use crate::Micros;

/// Virtual carrier sense.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NavState {
    pub expiry: Micros,
    pub setter_bss: Option<u32>,
    /// Frame id that last extended the NAV.
    pub set_by: Option<u64>,
    pub set_at: Micros,
}

impl NavState {
    pub fn active(&self, now: Micros) -> bool {
        now < self.expiry
    }

    pub fn reset(&mut self, now: Micros) {
        self.expiry = self.expiry.min(now);
        self.set_by = None;
    }
}

/// Update from an overheard frame whose duration field ends at `until`.
/// Returns true if the NAV was extended.
pub fn nav_update(
    nav: &mut NavState,
    node_bss: u32,
    frame_bss: u32,
    frame_id: u64,
    now: Micros,
    until: Micros,
    policy: NavPolicy,
) -> bool {
    if policy == NavPolicy::IntraBssOnly && node_bss != frame_bss {
        return false;
    }
    if until <= nav.expiry || until <= now {
        return false;
    }
    nav.expiry = until;
    nav.setter_bss = Some(frame_bss);
    nav.set_by = Some(frame_id);
    nav.set_at = now;
    true
}
