//! TUM trajectory text format: `timestamp tx ty tz qx qy qz qw` per line.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion};

use crate::error::{Error, Result};
use crate::geometry::{RigidPose, Vec3};
use crate::metrics::Trajectory;

pub fn to_string(traj: &Trajectory) -> String {
    let mut s = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for p in traj.poses() {
        let q = UnitQuaternion::from_rotation_matrix(&p.rotation);
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {}",
            p.timestamp, p.translation.x, p.translation.y, p.translation.z, q.i, q.j, q.k, q.w
        );
    }
    s
}

pub fn write_file(path: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    std::fs::write(path, to_string(traj))?;
    Ok(())
}

pub fn read<R: BufRead>(r: R) -> Result<Trajectory> {
    let mut poses = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = text
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e: std::num::ParseFloatError| Error::Parse { line: i + 1, msg: e.to_string() })?;
        if vals.len() != 8 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected 8 fields, found {}", vals.len()),
            });
        }
        let q = UnitQuaternion::from_quaternion(Quaternion::new(vals[7], vals[4], vals[5], vals[6]));
        poses.push(RigidPose::new(
            q.to_rotation_matrix(),
            Vec3::new(vals[1], vals[2], vals[3]),
            vals[0],
        ));
    }
    Trajectory::new(poses)
}

pub fn read_file(path: impl AsRef<Path>) -> Result<Trajectory> {
    let f = std::fs::File::open(path)?;
    read(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_tight() {
        let poses = (0..5)
            .map(|i| {
                RigidPose::from_yaw(
                    Vec3::new(i as f64 * 0.2, -0.01 * i as f64, 0.0),
                    0.3 * i as f64 - 0.5,
                    i as f64 * 0.1,
                )
            })
            .collect();
        let traj = Trajectory::new(poses).unwrap();
        let back = read(to_string(&traj).as_bytes()).unwrap();
        for (a, b) in traj.poses().iter().zip(back.poses()) {
            assert_eq!(a.timestamp, b.timestamp);
            assert_eq!(a.translation, b.translation);
            assert!((a.rotation.matrix() - b.rotation.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn comments_and_bad_rows() {
        let ok = "# header\n\n0 0 0 0 0 0 0 1\n0.1 1 0 0 0 0 0 1\n";
        assert_eq!(read(ok.as_bytes()).unwrap().len(), 2);
        assert!(read("0 0 0 0 0 0 1\n".as_bytes()).is_err());
    }
}
