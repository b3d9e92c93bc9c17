#include "potminer/dataset_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace potminer {

std::string format_coord(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    std::string s(buf);
    const auto dot = s.find('.');
    if (dot != std::string::npos) {
        auto last = s.find_last_not_of('0');
        if (last == dot) {
            last -= 1;  // drop the dot too
        }
        s.erase(last + 1);
    }
    return s;
}

double quantize_coord(double v) {
    const std::string s = format_coord(v);
    return std::strtod(s.c_str(), nullptr);
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
        out.push_back(tok);
    }
    return out;
}

double parse_double(const std::string& tok, const std::string& path, std::size_t line) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') {
        throw ParseError(path, line, "expected a number, got '" + tok + "'");
    }
    return v;
}

long parse_long(const std::string& tok, const std::string& path, std::size_t line) {
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0') {
        throw ParseError(path, line, "expected an integer, got '" + tok + "'");
    }
    return v;
}

}  // namespace

Dataset read_dataset(std::istream& in, const std::string& path) {
    Dataset dataset;
    Shot* current = nullptr;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto tokens = split_ws(line);
        if (tokens.empty()) {
            continue;
        }
        const std::string& tag = tokens[0];
        if (tag == "shot") {
            if (tokens.size() != 3) {
                throw ParseError(path, lineno, "shot line needs <shot_id> <num_frames>");
            }
            Shot shot;
            shot.shot_id = static_cast<int>(parse_long(tokens[1], path, lineno));
            shot.num_frames = static_cast<int>(parse_long(tokens[2], path, lineno));
            dataset.push_back(std::move(shot));
            current = &dataset.back();
        } else if (tag == "traj") {
            if (!current) {
                throw ParseError(path, lineno, "traj record before any shot header");
            }
            if (tokens.size() < 3 || (tokens.size() - 3) % 3 != 0) {
                throw ParseError(path, lineno, "traj line needs <id> <start_frame> then (x y fg) triples");
            }
            Trajectory t;
            t.id = static_cast<int>(parse_long(tokens[1], path, lineno));
            t.start_frame = static_cast<int>(parse_long(tokens[2], path, lineno));
            const std::size_t frames = (tokens.size() - 3) / 3;
            t.points.reserve(frames);
            t.fg.reserve(frames);
            for (std::size_t i = 0; i < frames; ++i) {
                const double x = parse_double(tokens[3 + 3 * i], path, lineno);
                const double y = parse_double(tokens[4 + 3 * i], path, lineno);
                const std::string& fg_tok = tokens[5 + 3 * i];
                if (fg_tok != "0" && fg_tok != "1") {
                    throw ParseError(path, lineno, "fg flag must be 0 or 1, got '" + fg_tok + "'");
                }
                t.points.emplace_back(x, y);
                t.fg.push_back(fg_tok == "1");
            }
            current->trajectories.push_back(std::move(t));
        } else if (tag == "labels") {
            if (!current) {
                throw ParseError(path, lineno, "labels record before any shot header");
            }
            if (static_cast<int>(tokens.size()) - 1 != current->num_frames) {
                throw ParseError(path, lineno, "labels line needs exactly num_frames entries");
            }
            current->frame_labels = std::vector<std::string>(tokens.begin() + 1, tokens.end());
        } else {
            throw ParseError(path, lineno, "unknown record tag '" + tag + "'");
        }
    }
    for (const auto& shot : dataset) {
        shot.validate();
    }
    return dataset;
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open dataset file: " + path);
    }
    return read_dataset(in, path);
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
    for (const auto& shot : dataset) {
        out << "shot " << shot.shot_id << ' ' << shot.num_frames << '\n';
        for (const auto& t : shot.trajectories) {
            out << "traj " << t.id << ' ' << t.start_frame;
            for (std::size_t i = 0; i < t.points.size(); ++i) {
                out << ' ' << format_coord(t.points[i].x) << ' ' << format_coord(t.points[i].y)
                    << ' ' << (t.fg[i] ? '1' : '0');
            }
            out << '\n';
        }
        if (shot.frame_labels) {
            out << "labels";
            for (const auto& l : *shot.frame_labels) {
                out << ' ' << l;
            }
            out << '\n';
        }
    }
}

void save_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    write_dataset(dataset, out);
}

}  // namespace potminer
