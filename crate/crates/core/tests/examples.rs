//! Every example must run to completion.

macro_rules! example {
    ($name:ident, $file:literal) => {
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $name() {
            $name::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(knr_world, "knr_world.rs");
example!(ridge_estimation, "ridge_estimation.rs");
example!(reward_randomization, "reward_randomization.rs");
example!(planners, "planners.rs");
example!(planex_corridor, "planex_corridor.rs");
example!(diagnostics_report, "diagnostics_report.rs");
