use nalgebra::{Vector2, Vector4};
use proptest::prelude::*;

use hingeflight::allocation::{AllocationConfig, AllocationLimits, Allocator, NullspaceWarmStart};
use hingeflight::model::{wrench_from_inputs, PlatformParams, WrenchCommand};

fn vec4(range: std::ops::Range<f64>) -> impl Strategy<Value = Vector4<f64>> {
    prop::array::uniform4(range).prop_map(Vector4::from)
}

fn setup() -> (PlatformParams, Allocator, AllocationLimits) {
    let p = PlatformParams::default();
    let cfg = AllocationConfig::default();
    let alloc = Allocator::new(&p, &cfg);
    let limits = AllocationLimits::nominal(&p, &cfg);
    (p, alloc, limits)
}

proptest! {
    #[test]
    fn exact_for_any_command(force in prop::array::uniform3(-3.0..3.0f64), torque in prop::array::uniform3(-0.5..0.5f64)) {
        // holds even when the demand is far outside the reachable set
        let (p, alloc, limits) = setup();
        let u = WrenchCommand::new(force.into(), torque.into());
        let s = alloc.nullspace_allocate(&u, &Vector4::zeros(), &Vector4::repeat(p.hover_thrust()), &limits, &NullspaceWarmStart::default());
        prop_assert!((alloc.w() * s.f - u.to_vector()).amax() <= 1e-9);
    }

    #[test]
    fn fd_is_exact_for_any_offset(force in prop::array::uniform3(-3.0..3.0f64), z in prop::array::uniform2(-1.0..1.0f64)) {
        let (_, alloc, _) = setup();
        let u = WrenchCommand::new(force.into(), nalgebra::Vector3::zeros());
        let s = alloc.fd_allocate(&u, &Vector2::from(z), &Vector4::zeros());
        prop_assert!((alloc.w() * s.f - u.to_vector()).amax() <= 1e-12);
    }

    #[test]
    fn deterministic(alpha in vec4(-1.0..1.0), thrust in vec4(0.05..0.5)) {
        let (p, alloc, limits) = setup();
        let u = wrench_from_inputs(&alpha, &thrust, &p);
        let prev = Vector4::repeat(p.hover_thrust());
        let a = alloc.nullspace_allocate(&u, &Vector4::zeros(), &prev, &limits, &NullspaceWarmStart::default());
        let b = alloc.nullspace_allocate(&u, &Vector4::zeros(), &prev, &limits, &NullspaceWarmStart::default());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn steps_respect_rate_limits(alpha in vec4(-1.0..1.0), thrust in vec4(0.05..0.6), frac in 0.0..1.0f64) {
        // a reachable command a fraction of one rate-limited step away from
        // the previous inputs
        let (p, alloc, limits) = setup();
        let alpha_prev = alpha;
        let thrust_prev = thrust;
        let alpha_next = alpha + Vector4::repeat(frac * limits.dx_max[0]);
        let u = wrench_from_inputs(&alpha_next, &thrust_prev, &p);
        let s = alloc.nullspace_allocate(&u, &alpha_prev, &thrust_prev, &limits, &NullspaceWarmStart::default());
        for i in 0..4 {
            prop_assert!((s.alpha[i] - alpha_prev[i]).abs() <= limits.dx_max[i] + 1e-9);
            prop_assert!((s.thrust[i] - thrust_prev[i]).abs() <= limits.dx_max[4 + i] + 1e-9);
            prop_assert!(s.thrust[i] <= limits.t_max[i] + 1e-9);
        }
    }
}
