use nalgebra::{Vector2, Vector3};

use conetrack_core::geometry::{Pose, Quaternion};
use conetrack_core::odometry::PoseSource;
use conetrack_core::vision::color::rgb_to_hsv;
use conetrack_core::vision::{dominant_color, ColorConfig, ConeColor, HsvPixel, RgbImage, RgbPixel};
use conetrack_sim::patch::render_cone_patch;
use conetrack_sim::{drive, drive_laps, generate_track, gnss_stream, NoiseModel, TrackParams, TrackShape};

fn color_of(img: &RgbImage) -> ConeColor {
    let hsv: Vec<HsvPixel> = img.pixels().iter().map(|p| rgb_to_hsv(RgbPixel::from(*p))).collect();
    dominant_color(&hsv, &ColorConfig::default()).unwrap()
}

/// Cone body pixels: saturated paint or the bright white collar.
fn cone_pixels(img: &RgbImage) -> usize {
    img.pixels()
        .iter()
        .map(|p| rgb_to_hsv(RgbPixel::from(*p)))
        .filter(|c| c.s > 0.7 || (c.s < 0.1 && c.v > 0.85))
        .count()
}

#[test]
fn blue_cone_in_full_light_reads_blue() {
    assert_eq!(color_of(&render_cone_patch(ConeColor::Blue, 6.0, 1.0, 1)), ConeColor::Blue);
}

#[test]
fn red_cone_in_dim_light_still_reads_red() {
    assert_eq!(color_of(&render_cone_patch(ConeColor::Red, 6.0, 0.4, 2)), ConeColor::Red);
}

#[test]
fn doubling_the_range_quarters_the_patch() {
    for range in [3.0, 4.0, 5.0, 6.5] {
        let near = render_cone_patch(ConeColor::Yellow, range, 1.0, 3);
        let far = render_cone_patch(ConeColor::Yellow, 2.0 * range, 1.0, 3);
        let area = |i: &RgbImage| (i.width() * i.height()) as f64;
        let ratio = area(&far) / area(&near);
        assert!((ratio - 0.25).abs() <= 0.025, "box area ratio {ratio} at {range} m");
        let body = cone_pixels(&far) as f64 / cone_pixels(&near) as f64;
        assert!((body - 0.25).abs() <= 0.025, "cone area ratio {body} at {range} m");
    }
}

#[test]
fn gnss_errors_follow_the_noise_model() {
    let truth: Vec<(f64, Pose)> = (0..1000)
        .map(|k| {
            let t = k as f64 * 0.1;
            (t, Pose::from_placement(Vector3::new(t, 2.0 * t.sin(), 0.8), Quaternion::from_yaw(0.01 * t)))
        })
        .collect();
    let noise = NoiseModel { position_sigma: 0.02, heading_sigma: 0.0, seed: 21 };
    let stream = gnss_stream(&truth, &noise);
    assert!(stream.iter().all(|g| g.source == PoseSource::Gnss));
    // the horizontal error norm of two N(0, σ²) axes averages σ·√(π/2)
    let mean = stream.iter().zip(&truth).map(|(g, (_, p))| (g.pose.position() - p.position()).xy().norm()).sum::<f64>() / 1000.0;
    let expected = 0.02 * (std::f64::consts::PI / 2.0).sqrt();
    assert!(mean >= 0.7 * expected && mean <= 1.3 * expected, "{mean} vs {expected}");
    assert_eq!(stream, gnss_stream(&truth, &noise));
    let exact = gnss_stream(&truth, &NoiseModel { position_sigma: 0.0, heading_sigma: 0.0, seed: 21 });
    assert!(exact.iter().zip(&truth).all(|(g, (_, p))| g.pose == *p));
}

#[test]
fn driving_follows_the_centerline_kinematics() {
    let circle = generate_track(&TrackParams { shape: TrackShape::Circle { radius: 20.0 }, ..TrackParams::default() }, 0).unwrap();
    let poses = drive(&circle, 5.0, 0.1, 4.0).unwrap();
    assert!(poses.iter().all(|p| (p.yaw_rate - 0.25).abs() < 1e-6));
    let still = drive(&circle, 0.0, 0.1, 1.0).unwrap();
    assert!(still.windows(2).all(|w| w[0].position == w[1].position && w[0].heading == w[1].heading));

    let stadium = generate_track(&TrackParams::default(), 0).unwrap();
    let (speed, dt) = (5.0, 0.1);
    let lap = drive_laps(&stadium, speed, dt, 1.0).unwrap();
    let gap = (Vector2::from(lap.last().unwrap().position) - Vector2::from(lap[0].position)).norm();
    assert!(gap <= speed * dt + 1e-9, "{gap}");
    // stamps line up with a 10 Hz scan clock
    assert!(lap.iter().enumerate().all(|(k, p)| (p.stamp - k as f64 * dt).abs() < 1e-12));
}
