use hetnet_bench::{dense_env, desk_config, filled_buffer, random_action};
use hetnet_core::rng::stream;

#[test]
fn filled_buffer_spans_episode_boundaries() {
    let cfg = dense_env(20, 10);
    let buf = filled_buffer(&cfg, 35, 1);
    assert_eq!(buf.len(), 35);
    assert_eq!(buf.iter().filter(|t| t.done).count(), 3);
    assert!(buf.iter().all(|t| t.state.len() == cfg.layout().state_len()));
}

#[test]
fn random_actions_are_in_the_unit_box() {
    let mut rng = stream(0, "fixture-test");
    let a = random_action(76, &mut rng);
    assert_eq!(a.len(), 76);
    assert!(a.iter().all(|v| (0.0..1.0).contains(v)));
}

#[test]
fn desk_fixture_validates() {
    desk_config().validate().unwrap();
}
