#include "wireguide/cli/output.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "wireguide/errors.hpp"
#include "wireguide/version.hpp"

namespace wireguide::cli {
namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

double to_double(const std::string& s, const std::filesystem::path& path) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ValidationError(path.string() + ": bad number '" + s + "'");
    }
    return v;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

}  // namespace

std::string exact_number(double v) {
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

std::string provenance_line(const FileMeta& meta, const std::string& extra) {
    std::string line = std::string("# wireguide ") + kVersion + " master_seed=" + std::to_string(meta.master_seed) +
                       " run=" + meta.run;
    if (!extra.empty()) line += " " + extra;
    return line;
}

void write_snapshot_csv(const std::filesystem::path& path, const EnsembleSnapshot& snap, const FileMeta& meta) {
    auto out = open_out(path);
    out << provenance_line(meta, "time_s=" + exact_number(snap.time)) << '\n';
    out << "atom_id,x_m,y_m,z_m,vx_m_s,vy_m_s,vz_m_s,seeker,outcome,spin_flip_flagged,exit_time_s\n";
    for (std::size_t i = 0; i < snap.size(); ++i) {
        const AtomState& s = snap.states[i];
        const Outcome& o = snap.tags[i];
        out << i;
        for (int k = 0; k < 3; ++k) out << ',' << exact_number(s.position[k]);
        for (int k = 0; k < 3; ++k) out << ',' << exact_number(s.velocity[k]);
        out << ',' << (s.species.seeker == Seeker::HighField ? "high" : "low") << ',' << to_string(o.kind) << ','
            << (o.spin_flip_flagged ? 1 : 0) << ',' << exact_number(o.exit_time) << '\n';
    }
}

EnsembleSnapshot read_snapshot_csv(const std::filesystem::path& path, const AtomSpecies& base) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read " + path.string());
    EnsembleSnapshot snap;
    std::string line;
    bool have_time = false;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.front() == '#') {
            const auto at = line.find("time_s=");
            if (at != std::string::npos) {
                const auto end = line.find(' ', at);
                snap.time = to_double(line.substr(at + 7, end == std::string::npos ? end : end - at - 7), path);
                have_time = true;
            }
            continue;
        }
        if (!have_header) {
            have_header = true;
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 11) throw ValidationError(path.string() + ": expected 11 columns");
        if (static_cast<std::size_t>(to_double(f[0], path)) != snap.size()) {
            throw ValidationError(path.string() + ": atom ids must be consecutive from 0");
        }
        AtomState s;
        s.species = base;
        s.position = {to_double(f[1], path), to_double(f[2], path), to_double(f[3], path)};
        s.velocity = {to_double(f[4], path), to_double(f[5], path), to_double(f[6], path)};
        if (f[7] == "high") {
            s.species.seeker = Seeker::HighField;
        } else if (f[7] == "low") {
            s.species.seeker = Seeker::LowField;
        } else {
            throw ValidationError(path.string() + ": seeker must be high or low");
        }
        s.time = snap.time;
        Outcome o;
        o.kind = outcome_kind_from_string(f[8]);
        o.spin_flip_flagged = f[9] == "1";
        o.exit_time = to_double(f[10], path);
        snap.states.push_back(s);
        snap.tags.push_back(o);
    }
    if (!have_time) throw ValidationError(path.string() + ": missing time_s in the provenance line");
    for (auto& s : snap.states) s.time = snap.time;
    return snap;
}

void write_profiles_csv(const std::filesystem::path& path, const FileMeta& meta,
                        const std::vector<std::string>& columns,
                        const std::vector<std::vector<double>>& data) {
    auto out = open_out(path);
    out << provenance_line(meta) << '\n';
    for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
    out << '\n';
    const std::size_t rows = data.empty() ? 0 : data.front().size();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < data.size(); ++c) out << (c ? "," : "") << exact_number(data[c][r]);
        out << '\n';
    }
}

void write_pgm_file(const std::filesystem::path& path, const CcdImage& image, const FileMeta& meta) {
    auto out = open_out(path, std::ios::out | std::ios::binary);
    std::ostringstream comment;
    comment << provenance_line(meta).substr(2) << "\nview=" << to_string(image.view)
            << " pixel_m=" << exact_number(image.pixel_size) << " fov_u_m=" << exact_number(image.fov_u)
            << " fov_v_m=" << exact_number(image.fov_v) << " origin_u_m=" << exact_number(image.origin_u)
            << " origin_v_m=" << exact_number(image.origin_v) << "\nrows run from top (largest v) to bottom";
    write_pgm(out, image, comment.str());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    auto out = open_out(path, std::ios::out | std::ios::binary);
    out << text;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace wireguide::cli
