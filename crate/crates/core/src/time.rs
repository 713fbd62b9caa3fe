//! Millisecond UTC timestamps with calendar helpers that need no date library.

pub const MILLIS_PER_SECOND: i64 = 1_000;
pub const SECONDS_PER_DAY: i64 = 86_400;
pub const MILLIS_PER_DAY: i64 = SECONDS_PER_DAY * MILLIS_PER_SECOND;

/// Milliseconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Timestamp(i64);

impl Timestamp {
    pub const fn from_millis(millis: i64) -> Self {
        Timestamp(millis)
    }

    pub const fn from_seconds(seconds: i64) -> Self {
        Timestamp(seconds * MILLIS_PER_SECOND)
    }

    pub const fn millis(self) -> i64 {
        self.0
    }

    pub fn seconds_f64(self) -> f64 {
        self.0 as f64 / MILLIS_PER_SECOND as f64
    }

    /// Whole UTC second containing this instant.
    pub const fn second(self) -> i64 {
        self.0.div_euclid(MILLIS_PER_SECOND)
    }

    /// Calendar day index (days since 1970-01-01) at a fixed UTC offset.
    pub const fn day(self, utc_offset_s: i64) -> i64 {
        (self.0 + utc_offset_s * MILLIS_PER_SECOND).div_euclid(MILLIS_PER_DAY)
    }

    /// Milliseconds elapsed since local midnight at a fixed UTC offset.
    pub const fn millis_of_day(self, utc_offset_s: i64) -> i64 {
        (self.0 + utc_offset_s * MILLIS_PER_SECOND).rem_euclid(MILLIS_PER_DAY)
    }

    /// Local hour of day, 0..24.
    pub const fn hour(self, utc_offset_s: i64) -> u8 {
        (self.millis_of_day(utc_offset_s) / (3_600 * MILLIS_PER_SECOND)) as u8
    }

    /// Local weekday, Monday = 0 .. Sunday = 6.
    pub const fn weekday(self, utc_offset_s: i64) -> u8 {
        // 1970-01-01 was a Thursday.
        (self.day(utc_offset_s) + 3).rem_euclid(7) as u8
    }

    pub const fn add_seconds(self, seconds: i64) -> Self {
        Timestamp(self.0 + seconds * MILLIS_PER_SECOND)
    }
}
