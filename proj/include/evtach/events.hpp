#ifndef EVTACH_EVENTS_HPP
#define EVTACH_EVENTS_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

namespace evtach {

/// One sensor event: timestamp in microseconds since stream start, pixel
/// coordinates, and polarity (+1 brightening, -1 darkening).
struct Event {
    std::int64_t t_us = 0;
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::int8_t p = 1;

    friend bool operator==(const Event&, const Event&) = default;
};

/// Time-ordered event sequence tied to a sensor geometry.
/// Invariants: events non-decreasing in t, duration >= max event t.
struct EventStream {
    std::vector<Event> events;
    int width = 0;
    int height = 0;
    std::int64_t duration_us = 0;

    friend bool operator==(const EventStream&, const EventStream&) = default;
};

/// Window [t_start, t_start + t_len) of a parent stream. Events are copied,
/// order inherited; geometry carried along so slices are self-contained.
struct EventSlice {
    std::vector<Event> events;
    int width = 0;
    int height = 0;
    std::int64_t t_start_us = 0;
    std::int64_t t_len_us = 0;
};

/// Slicing configuration for pairwise registration.
/// t_s is the step between consecutive slice starts; the paper-style overlap
/// is t_l - t_s and is never stored.
struct SlicingParams {
    std::int64_t t_l_us = 10'000;
    std::int64_t t_s_us = 1'000;
    double temporal_scale = 1.0; // spatial units per millisecond of depth
};

/// Point in the (x, y, scaled-t) embedding.
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

/// Pixel-plane point (centroids, cell centers).
struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline double dist2(const Vec2& a, const Vec2& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

inline double dist2(const Vec3& a, const Vec3& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return dx * dx + dy * dy + dz * dz;
}

enum class EventFileFormat {
    Csv,    // canonical text format, '# width=' / '# height=' comments + header row
    Binary, // 'EVT1' magic, little-endian, length-prefixed
    Auto,   // sniff magic bytes / extension
};

/// Reads an event file. Events are re-sorted by t if the file is unordered
/// (stable, ties keep file order). Throws ParseError with a line number on a
/// malformed row and ValidationError if a coordinate falls outside the
/// declared geometry. Duration is taken from the optional '# duration_us='
/// header (binary: trailing u64), else the maximum event timestamp.
EventStream load_events(const std::filesystem::path& path,
                        EventFileFormat format = EventFileFormat::Auto);

/// Writes a stream so that load_events reads back an identical stream.
/// Throws IoError with path context on failure.
void store_events(const EventStream& stream, const std::filesystem::path& path,
                  EventFileFormat format = EventFileFormat::Csv);

/// Events with t_start <= t < t_start + t_len. Out-of-range windows yield
/// empty slices.
EventSlice slice(const EventStream& stream, std::int64_t t_start_us,
                 std::int64_t t_len_us);

/// Restriction of an existing slice to a sub-window (same half-open rule).
/// t_start_us is absolute, i.e. on the parent stream's clock.
EventSlice slice(const EventSlice& parent, std::int64_t t_start_us,
                 std::int64_t t_len_us);

/// Maps each event to (x, y, (t - t_start) * temporal_scale / 1000).
/// Time is re-based to the slice start so two slices of a steadily rotating
/// target differ by a pure rotation about the T axis; polarity is dropped.
/// Output order matches event order.
std::vector<Vec3> embed(const EventSlice& s, double temporal_scale);

} // namespace evtach

#endif // EVTACH_EVENTS_HPP
