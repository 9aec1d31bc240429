#include "evtach/events.hpp"
#include "evtach/errors.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace evtach {
namespace {

constexpr std::array<char, 4> kBinaryMagic = {'E', 'V', 'T', '1'};

bool looks_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size())) return false;
    return magic == kBinaryMagic;
}

// Accepts "key=value"; returns false if key does not match.
bool parse_header_comment(const std::string& line, const char* key, std::int64_t& out) {
    std::string_view sv(line);
    sv.remove_prefix(1); // '#'
    while (!sv.empty() && sv.front() == ' ') sv.remove_prefix(1);
    std::string_view k(key);
    if (sv.substr(0, k.size()) != k || sv.size() <= k.size() || sv[k.size()] != '=') return false;
    sv.remove_prefix(k.size() + 1);
    auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), out);
    return ec == std::errc() && ptr == sv.data() + sv.size();
}

std::int64_t parse_int_field(std::string_view field, std::size_t line_no, const char* what) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " field '" +
                         std::string(field) + "'");
    }
    return v;
}

void validate_event(std::int64_t t, std::int64_t x, std::int64_t y, std::int64_t p,
                    int width, int height, std::size_t line_no) {
    if (t < 0)
        throw ValidationError("line " + std::to_string(line_no) + ": negative timestamp");
    if (x < 0 || x >= width || y < 0 || y >= height)
        throw ValidationError("line " + std::to_string(line_no) + ": coordinate (" +
                              std::to_string(x) + "," + std::to_string(y) +
                              ") outside geometry " + std::to_string(width) + "x" +
                              std::to_string(height));
    if (p != 1 && p != -1)
        throw ValidationError("line " + std::to_string(line_no) + ": polarity must be 1 or -1");
}

EventStream load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");

    EventStream stream;
    std::int64_t declared_duration = -1;
    bool have_width = false, have_height = false, have_header_row = false;
    std::string line;
    std::size_t line_no = 0;
    bool sorted = true;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            std::int64_t v = 0;
            if (parse_header_comment(line, "width", v)) {
                stream.width = static_cast<int>(v);
                have_width = true;
            } else if (parse_header_comment(line, "height", v)) {
                stream.height = static_cast<int>(v);
                have_height = true;
            } else if (parse_header_comment(line, "duration_us", v)) {
                declared_duration = v;
            }
            continue;
        }
        if (!have_header_row) {
            if (line != "t_us,x,y,p")
                throw ParseError("line " + std::to_string(line_no) +
                                 ": expected header 't_us,x,y,p', got '" + line + "'");
            if (!have_width || !have_height)
                throw ParseError("line " + std::to_string(line_no) +
                                 ": '# width=' and '# height=' comments must precede the header");
            if (stream.width <= 0 || stream.height <= 0)
                throw ValidationError("declared geometry must be positive");
            have_header_row = true;
            continue;
        }

        std::string_view sv(line);
        std::array<std::string_view, 4> fields;
        std::size_t nf = 0;
        while (nf < 4) {
            const std::size_t comma = sv.find(',');
            fields[nf++] = sv.substr(0, comma);
            if (comma == std::string_view::npos) break;
            sv.remove_prefix(comma + 1);
        }
        if (nf != 4 || fields[3].find(',') != std::string_view::npos)
            throw ParseError("line " + std::to_string(line_no) + ": expected 4 fields");

        const std::int64_t t = parse_int_field(fields[0], line_no, "t_us");
        const std::int64_t x = parse_int_field(fields[1], line_no, "x");
        const std::int64_t y = parse_int_field(fields[2], line_no, "y");
        const std::int64_t p = parse_int_field(fields[3], line_no, "p");
        validate_event(t, x, y, p, stream.width, stream.height, line_no);

        if (!stream.events.empty() && t < stream.events.back().t_us) sorted = false;
        stream.events.push_back(Event{t, static_cast<std::uint16_t>(x),
                                      static_cast<std::uint16_t>(y),
                                      static_cast<std::int8_t>(p)});
    }
    if (!have_header_row) throw ParseError("missing 't_us,x,y,p' header row");

    if (!sorted) {
        std::stable_sort(stream.events.begin(), stream.events.end(),
                         [](const Event& a, const Event& b) { return a.t_us < b.t_us; });
    }
    const std::int64_t max_t = stream.events.empty() ? 0 : stream.events.back().t_us;
    stream.duration_us = std::max(declared_duration, max_t);
    return stream;
}

template <typename T>
bool read_pod(std::istream& in, T& v) {
    return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

EventStream load_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");

    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kBinaryMagic)
        throw ParseError("'" + path.string() + "': missing EVT1 magic");

    std::uint32_t w = 0, h = 0;
    std::uint64_t count = 0;
    if (!read_pod(in, w) || !read_pod(in, h) || !read_pod(in, count))
        throw ParseError("'" + path.string() + "': truncated header");
    if (w == 0 || h == 0) throw ValidationError("declared geometry must be positive");

    EventStream stream;
    stream.width = static_cast<int>(w);
    stream.height = static_cast<int>(h);
    stream.events.reserve(count);
    bool sorted = true;
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint64_t t = 0;
        std::uint16_t x = 0, y = 0;
        std::int8_t p = 0;
        if (!read_pod(in, t) || !read_pod(in, x) || !read_pod(in, y) || !read_pod(in, p))
            throw ParseError("'" + path.string() + "': truncated at event " + std::to_string(i));
        validate_event(static_cast<std::int64_t>(t), x, y, p, stream.width, stream.height, i);
        if (!stream.events.empty() && static_cast<std::int64_t>(t) < stream.events.back().t_us)
            sorted = false;
        stream.events.push_back(Event{static_cast<std::int64_t>(t), x, y, p});
    }
    // Optional trailer: files written by strict external writers end here.
    std::uint64_t declared = 0;
    const bool have_declared = read_pod(in, declared);

    if (!sorted) {
        std::stable_sort(stream.events.begin(), stream.events.end(),
                         [](const Event& a, const Event& b) { return a.t_us < b.t_us; });
    }
    const std::int64_t max_t = stream.events.empty() ? 0 : stream.events.back().t_us;
    stream.duration_us =
        std::max(have_declared ? static_cast<std::int64_t>(declared) : 0, max_t);
    return stream;
}

void store_csv(const EventStream& stream, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << "# width=" << stream.width << "\n";
    out << "# height=" << stream.height << "\n";
    out << "# duration_us=" << stream.duration_us << "\n";
    out << "t_us,x,y,p\n";
    for (const Event& e : stream.events) {
        out << e.t_us << ',' << e.x << ',' << e.y << ',' << static_cast<int>(e.p) << "\n";
    }
    out.flush();
    if (!out) throw IoError("write failure on '" + path.string() + "'");
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void store_binary(const EventStream& stream, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(kBinaryMagic.data(), kBinaryMagic.size());
    write_pod(out, static_cast<std::uint32_t>(stream.width));
    write_pod(out, static_cast<std::uint32_t>(stream.height));
    write_pod(out, static_cast<std::uint64_t>(stream.events.size()));
    for (const Event& e : stream.events) {
        write_pod(out, static_cast<std::uint64_t>(e.t_us));
        write_pod(out, e.x);
        write_pod(out, e.y);
        write_pod(out, e.p);
    }
    write_pod(out, static_cast<std::uint64_t>(stream.duration_us));
    out.flush();
    if (!out) throw IoError("write failure on '" + path.string() + "'");
}

EventFileFormat resolve_format(const std::filesystem::path& path, EventFileFormat format,
                               bool for_reading) {
    if (format != EventFileFormat::Auto) return format;
    if (for_reading) {
        return looks_binary(path) ? EventFileFormat::Binary : EventFileFormat::Csv;
    }
    const auto ext = path.extension().string();
    return (ext == ".evt" || ext == ".bin") ? EventFileFormat::Binary : EventFileFormat::Csv;
}

} // namespace

EventStream load_events(const std::filesystem::path& path, EventFileFormat format) {
    if (!std::filesystem::exists(path))
        throw IoError("no such file: '" + path.string() + "'");
    return resolve_format(path, format, true) == EventFileFormat::Binary ? load_binary(path)
                                                                         : load_csv(path);
}

void store_events(const EventStream& stream, const std::filesystem::path& path,
                  EventFileFormat format) {
    if (resolve_format(path, format, false) == EventFileFormat::Binary)
        store_binary(stream, path);
    else
        store_csv(stream, path);
}

namespace {

EventSlice slice_range(const std::vector<Event>& events, int width, int height,
                       std::int64_t t_start_us, std::int64_t t_len_us) {
    if (t_start_us < 0) throw ValidationError("slice start must be >= 0");
    if (t_len_us <= 0) throw ValidationError("slice length must be > 0");
    EventSlice s;
    s.width = width;
    s.height = height;
    s.t_start_us = t_start_us;
    s.t_len_us = t_len_us;
    const auto lo = std::lower_bound(events.begin(), events.end(), t_start_us,
                                     [](const Event& e, std::int64_t t) { return e.t_us < t; });
    const auto hi = std::lower_bound(lo, events.end(), t_start_us + t_len_us,
                                     [](const Event& e, std::int64_t t) { return e.t_us < t; });
    s.events.assign(lo, hi);
    return s;
}

} // namespace

EventSlice slice(const EventStream& stream, std::int64_t t_start_us, std::int64_t t_len_us) {
    return slice_range(stream.events, stream.width, stream.height, t_start_us, t_len_us);
}

EventSlice slice(const EventSlice& parent, std::int64_t t_start_us, std::int64_t t_len_us) {
    return slice_range(parent.events, parent.width, parent.height, t_start_us, t_len_us);
}

std::vector<Vec3> embed(const EventSlice& s, double temporal_scale) {
    if (temporal_scale <= 0.0) throw ValidationError("temporal_scale must be > 0");
    std::vector<Vec3> pts;
    pts.reserve(s.events.size());
    for (const Event& e : s.events) {
        pts.push_back(Vec3{static_cast<double>(e.x), static_cast<double>(e.y),
                           static_cast<double>(e.t_us - s.t_start_us) * temporal_scale / 1000.0});
    }
    return pts;
}

} // namespace evtach
