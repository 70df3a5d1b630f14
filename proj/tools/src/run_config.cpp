#include "wireguide/cli/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>

#include "wireguide/constants.hpp"
#include "wireguide/errors.hpp"

namespace wireguide::cli {
namespace {

namespace c = wireguide::constants;

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, std::string_view text) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto* first = t.data();
    const auto* last = t.data() + t.size();
    if (!t.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || t.empty()) {
        throw ValidationError("key '" + key + "': expected a number, got '" + t + "'");
    }
    return v;
}

std::uint64_t parse_uint(const std::string& key, std::string_view text) {
    const std::string t = trim(text);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
        throw ValidationError("key '" + key + "': expected a non-negative integer, got '" + t + "'");
    }
    return v;
}

bool parse_bool(const std::string& key, std::string_view text) {
    const std::string t = trim(text);
    if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
    if (t == "false" || t == "no" || t == "off" || t == "0") return false;
    throw ValidationError("key '" + key + "': expected true/false, got '" + t + "'");
}

std::vector<double> parse_list(const std::string& key, std::string_view text) {
    std::vector<double> out;
    const std::string t = trim(text);
    if (t.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = t.find(',', start);
        out.push_back(parse_double(key, std::string_view(t).substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

Vec3 parse_vec3(const std::string& key, std::string_view text) {
    const auto v = parse_list(key, text);
    if (v.size() != 3) throw ValidationError("key '" + key + "': expected three comma-separated numbers");
    return {v[0], v[1], v[2]};
}

std::string format_list(const std::vector<double>& v, double unit) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out += ", ";
        out += format_number(v[i] / unit);
    }
    return out;
}

std::string format_vec3(const Vec3& v, double unit) {
    return format_list({v.x(), v.y(), v.z()}, unit);
}

std::string format_bool(bool b) { return b ? "true" : "false"; }

struct Field {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};


template <typename Getter>
Field scalar(std::string key, double unit, Getter ref) {
    return {key,
            [=](const RunConfig& r) { return format_number(ref(const_cast<RunConfig&>(r)) / unit); },
            [=](RunConfig& r, const std::string& k, const std::string& v) { ref(r) = parse_double(k, v) * unit; }};
}

template <typename Getter>
Field vector3(std::string key, double unit, Getter ref) {
    return {key,
            [=](const RunConfig& r) { return format_vec3(ref(const_cast<RunConfig&>(r)), unit); },
            [=](RunConfig& r, const std::string& k, const std::string& v) { ref(r) = parse_vec3(k, v) * unit; }};
}

template <typename Getter>
Field boolean(std::string key, Getter ref) {
    return {key,
            [=](const RunConfig& r) { return format_bool(ref(const_cast<RunConfig&>(r))); },
            [=](RunConfig& r, const std::string& k, const std::string& v) { ref(r) = parse_bool(k, v); }};
}

const std::vector<Field>& schema() {
    static const std::vector<Field> fields = [] {
        std::vector<Field> f;
        f.push_back({"run.name", [](const RunConfig& r) { return r.name; },
                     [](RunConfig& r, const std::string&, const std::string& v) { r.name = trim(v); }});
        f.push_back({"run.master_seed", [](const RunConfig& r) { return std::to_string(r.master_seed); },
                     [](RunConfig& r, const std::string& k, const std::string& v) { r.master_seed = parse_uint(k, v); }});

        f.push_back(scalar("wire.current_A", 1.0, [](RunConfig& r) -> double& { return r.field.wire.current; }));
        f.push_back(scalar("wire.radius_um", c::micrometre, [](RunConfig& r) -> double& { return r.field.wire.radius; }));
        f.push_back(vector3("wire.axis", 1.0, [](RunConfig& r) -> Vec3& { return r.field.wire.axis; }));
        f.push_back(vector3("wire.axis_point_mm", c::millimetre, [](RunConfig& r) -> Vec3& { return r.field.wire.axis_point; }));
        f.push_back(scalar("wire.length_cm", 1.0e-2, [](RunConfig& r) -> double& { return r.field.wire.length; }));

        f.push_back(scalar("bias.magnitude_G", c::gauss, [](RunConfig& r) -> double& { return r.field.bias.magnitude; }));
        f.push_back(vector3("bias.direction", 1.0, [](RunConfig& r) -> Vec3& { return r.field.bias.direction; }));

        f.push_back(boolean("gravity.on", [](RunConfig& r) -> bool& { return r.field.gravity_on; }));
        f.push_back(vector3("gravity.direction", 1.0, [](RunConfig& r) -> Vec3& { return r.field.gravity_direction; }));

        f.push_back(scalar("species.mass_kg", 1.0, [](RunConfig& r) -> double& { return r.species.mass; }));
        f.push_back(scalar("species.mu_eff_muB", c::bohr_magneton, [](RunConfig& r) -> double& { return r.species.mu_eff; }));

        f.push_back(vector3("mot.offset_mm", c::millimetre, [](RunConfig& r) -> Vec3& { return r.mot.center_offset; }));
        f.push_back(boolean("mot.on_trap", [](RunConfig& r) -> bool& { return r.mot_on_trap; }));
        f.push_back(scalar("mot.fwhm_mm", c::millimetre, [](RunConfig& r) -> double& { return r.mot.fwhm; }));
        f.push_back(scalar("mot.temperature_uK", c::microkelvin, [](RunConfig& r) -> double& { return r.mot.temperature; }));
        f.push_back({"mot.atom_count", [](const RunConfig& r) { return std::to_string(r.mot.atom_count); },
                     [](RunConfig& r, const std::string& k, const std::string& v) {
                         r.mot.atom_count = static_cast<std::size_t>(parse_uint(k, v));
                     }});
        f.push_back(scalar("mot.high_field_fraction", 1.0, [](RunConfig& r) -> double& { return r.mot.seeker_fractions.high_field; }));
        f.push_back(scalar("mot.low_field_fraction", 1.0, [](RunConfig& r) -> double& { return r.mot.seeker_fractions.low_field; }));

        f.push_back(scalar("sequence.guide_time_ms", c::millisecond, [](RunConfig& r) -> double& { return r.guide_time; }));
        f.push_back({"sequence.snapshot_times_ms",
                     [](const RunConfig& r) { return format_list(r.snapshot_times, c::millisecond); },
                     [](RunConfig& r, const std::string& k, const std::string& v) {
                         r.snapshot_times = parse_list(k, v);
                         for (double& t : r.snapshot_times) t *= c::millisecond;
                     }});
        f.push_back(scalar("sequence.free_expansion_ms", c::millisecond, [](RunConfig& r) -> double& { return r.free_expansion_time; }));

        f.push_back(scalar("integrator.dt_us", 1.0e-6, [](RunConfig& r) -> double& { return r.integrator.dt; }));
        f.push_back(scalar("integrator.domain_radius_mm", c::millimetre, [](RunConfig& r) -> double& { return r.integrator.domain_radius; }));
        f.push_back(scalar("integrator.adiabaticity_threshold", 1.0, [](RunConfig& r) -> double& { return r.integrator.adiabaticity_threshold; }));
        f.push_back(boolean("integrator.wire_collision", [](RunConfig& r) -> bool& { return r.integrator.wire_collision_on; }));

        f.push_back({"analysis.kind", [](const RunConfig& r) { return r.analysis.kind; },
                     [](RunConfig& r, const std::string&, const std::string& v) { r.analysis.kind = trim(v); }});
        f.push_back(scalar("analysis.kepler_capture_radius_mm", c::millimetre, [](RunConfig& r) -> double& { return r.analysis.kepler_capture_radius; }));
        f.push_back(scalar("analysis.side_capture_radius_mm", c::millimetre, [](RunConfig& r) -> double& { return r.analysis.side_capture_radius; }));
        f.push_back(boolean("analysis.spin_flip_counts_as_loss", [](RunConfig& r) -> bool& { return r.analysis.spin_flip_counts_as_loss; }));
        f.push_back(scalar("analysis.pixel_um", c::micrometre, [](RunConfig& r) -> double& { return r.analysis.pixel_size; }));
        f.push_back(scalar("analysis.top_fov_mm", c::millimetre, [](RunConfig& r) -> double& { return r.analysis.top_fov; }));
        f.push_back(scalar("analysis.side_fov_u_mm", c::millimetre, [](RunConfig& r) -> double& { return r.analysis.side_fov_u; }));
        f.push_back(scalar("analysis.side_fov_v_mm", c::millimetre, [](RunConfig& r) -> double& { return r.analysis.side_fov_v; }));
        f.push_back(scalar("analysis.detection_fov_mm", c::millimetre, [](RunConfig& r) -> double& { return r.analysis.detection_fov_length; }));
        f.push_back({"analysis.cut_half_width_px", [](const RunConfig& r) { return std::to_string(r.analysis.cut_half_width); },
                     [](RunConfig& r, const std::string& k, const std::string& v) {
                         r.analysis.cut_half_width = static_cast<std::size_t>(parse_uint(k, v));
                     }});
        f.push_back(boolean("analysis.poisson_noise", [](RunConfig& r) -> bool& { return r.analysis.poisson_noise; }));
        return f;
    }();
    return fields;
}

const Field* find_field(const std::string& key) {
    for (const auto& f : schema()) {
        if (f.key == key) return &f;
    }
    return nullptr;
}

}  // namespace

std::string format_number(double v) {
    // 15 significant digits absorb the last-bit noise of unit conversions, so
    // the text form is a fixed point of parse/format.
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return buf;
}

std::string all_keys_help() {
    std::string out;
    for (const auto& f : schema()) out += f.key + "\n";
    return out;
}

MotParams RunConfig::resolved_mot() const {
    MotParams m = mot;
    if (mot_on_trap) m.center_offset += side_trap_center(field.wire, field.bias).center - field.wire.axis_point;
    return m;
}

SequenceSpec RunConfig::sequence() const {
    SequenceSpec s;
    s.guide = field;
    s.guide_time = guide_time;
    s.snapshot_times = snapshot_times;
    s.free_expansion_time = free_expansion_time;
    s.master_seed = master_seed;
    return s;
}

LoadingOptions RunConfig::loading_options() const {
    LoadingOptions o;
    o.capture_radius = field.side_guide() ? analysis.side_capture_radius : analysis.kepler_capture_radius;
    o.spin_flip_counts_as_loss = analysis.spin_flip_counts_as_loss;
    return o;
}

void RunConfig::validate() const {
    if (name.empty()) throw ValidationError("run.name must not be empty");
    field.validate();
    species.validate();
    mot.validate();
    if (mot_on_trap) side_trap_center(field.wire, field.bias);
    sequence().validate();
    integrator.validate(field.wire);
    const auto& a = analysis;
    static const std::vector<std::string> kinds{"none", "images", "fig3", "fig4", "fig5", "fig6"};
    if (std::find(kinds.begin(), kinds.end(), a.kind) == kinds.end()) {
        throw ValidationError("analysis.kind must be one of none|images|fig3|fig4|fig5|fig6");
    }
    if (!(a.kepler_capture_radius > 0.0) || !(a.side_capture_radius > 0.0)) {
        throw ValidationError("capture radii must be > 0");
    }
    if (!(a.pixel_size > 0.0)) throw ValidationError("analysis.pixel_um must be > 0");
    if (!(a.top_fov > 0.0) || !(a.side_fov_u > 0.0) || !(a.side_fov_v > 0.0) || !(a.detection_fov_length > 0.0)) {
        throw ValidationError("fields of view must be > 0");
    }
}

KeyValues to_key_values(const RunConfig& cfg) {
    KeyValues kv;
    for (const auto& f : schema()) kv[f.key] = f.get(cfg);
    return kv;
}

RunConfig apply_key_values(RunConfig base, const KeyValues& kv) {
    for (const auto& [key, value] : kv) {
        const Field* f = find_field(key);
        if (f == nullptr) throw ValidationError("unknown configuration key '" + key + "'");
        f->set(base, key, value);
    }
    return base;
}

std::string to_text(const RunConfig& cfg) {
    std::ostringstream out;
    std::string section;
    for (const auto& [key, value] : to_key_values(cfg)) {
        const auto dot = key.find('.');
        const std::string s = key.substr(0, dot);
        if (s != section) {
            if (!section.empty()) out << '\n';
            out << '[' << s << "]\n";
            section = s;
        }
        out << key.substr(dot + 1) << " = " << value << '\n';
    }
    return out.str();
}

ConfigFile parse_config_text(std::string_view text) {
    ConfigFile file;
    KeyValues* target = &file.base;
    std::string section;
    bool in_variant = false;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string line = trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line = trim(line.substr(0, hash));
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no) + ": ";

        if (line.front() == '[') {
            if (line.back() != ']') throw ValidationError(where + "unterminated section header");
            const std::string header = trim(line.substr(1, line.size() - 2));
            if (header.rfind("variant", 0) == 0 && (header.size() == 7 || header[7] == ' ')) {
                const std::string name = trim(header.substr(7));
                if (name.empty()) throw ValidationError(where + "variant needs a name");
                for (const auto& v : file.variants) {
                    if (v.first == name) throw ValidationError(where + "duplicate variant '" + name + "'");
                }
                file.variants.emplace_back(name, KeyValues{});
                target = &file.variants.back().second;
                in_variant = true;
                section.clear();
            } else {
                if (in_variant) throw ValidationError(where + "plain sections must precede all variants");
                section = header;
                if (section.empty()) throw ValidationError(where + "empty section name");
            }
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ValidationError(where + "expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!in_variant) {
            if (section.empty()) throw ValidationError(where + "key outside of a section");
            key = section + "." + key;
        } else if (key.find('.') == std::string::npos) {
            throw ValidationError(where + "variant overrides use 'section.key = value'");
        }
        if (find_field(key) == nullptr) throw ValidationError(where + "unknown configuration key '" + key + "'");
        if (target->count(key) != 0) throw ValidationError(where + "duplicate key '" + key + "'");
        (*target)[key] = value;
    }
    return file;
}

std::vector<NamedRun> load_runs(const ConfigFile& file) {
    const RunConfig base = apply_key_values(RunConfig{}, file.base);
    std::vector<NamedRun> runs;
    if (file.variants.empty()) {
        base.validate();
        runs.push_back({"", base});
        return runs;
    }
    for (const auto& [name, overrides] : file.variants) {
        RunConfig cfg = apply_key_values(base, overrides);
        if (overrides.count("run.name") == 0) cfg.name = base.name + "/" + name;
        cfg.validate();
        runs.push_back({name, cfg});
    }
    return runs;
}

}  // namespace wireguide::cli
