//! FNV-1a checksums over state bit patterns, for determinism checks.

use crate::{Point3, Real, Vec3};

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// Incremental 64-bit FNV-1a hasher.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a(u64);

impl Default for Fnv1a {
    fn default() -> Self {
        Self(FNV_OFFSET)
    }
}

impl Fnv1a {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write_u64(&mut self, v: u64) {
        for byte in v.to_le_bytes() {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    /// Hashes the exact bit pattern, so -0.0 and 0.0 differ and NaNs are
    /// stable.
    pub fn write_real(&mut self, v: Real) {
        self.write_u64(v.to_bits());
    }

    pub fn write_vec3(&mut self, v: &Vec3) {
        self.write_real(v.x);
        self.write_real(v.y);
        self.write_real(v.z);
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

/// Checksum of a soft-body snapshot (positions then velocities).
pub fn soft_state_checksum(positions: &[Point3], velocities: &[Vec3]) -> u64 {
    let mut h = Fnv1a::new();
    h.write_u64(positions.len() as u64);
    for p in positions {
        h.write_vec3(&p.coords);
    }
    for v in velocities {
        h.write_vec3(v);
    }
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_states_hash_identically() {
        let p = [Point3::new(1.0, 2.0, 3.0), Point3::new(-0.5, 0.0, 4.0)];
        let v = [Vec3::new(0.1, 0.0, 0.0), Vec3::zeros()];
        assert_eq!(soft_state_checksum(&p, &v), soft_state_checksum(&p, &v));
    }

    #[test]
    fn bit_level_changes_change_the_hash() {
        let p = [Point3::new(1.0, 2.0, 3.0)];
        let v = [Vec3::zeros()];
        let mut p2 = p;
        p2[0].x = f64::from_bits(p[0].x.to_bits() ^ 1);
        assert_ne!(soft_state_checksum(&p, &v), soft_state_checksum(&p2, &v));
    }

    #[test]
    fn signed_zero_is_distinguished() {
        let a = [Point3::new(0.0, 0.0, 0.0)];
        let b = [Point3::new(-0.0, 0.0, 0.0)];
        let v = [Vec3::zeros()];
        assert_ne!(soft_state_checksum(&a, &v), soft_state_checksum(&b, &v));
    }
}
