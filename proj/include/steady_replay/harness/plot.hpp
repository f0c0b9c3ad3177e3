#pragma once

// SVG rendering of an episode log: total reward per episode for each method, and the share of
// successful episodes per method as bars. Everything drawn comes from the CSV.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "steady_replay/errors.hpp"
#include "steady_replay/replay.hpp"

namespace steady_replay {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw FormatError("csv: missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    for (char ch : line) {
        if (ch == '"') throw FormatError("csv: quoted fields are not supported");
        if (ch == ',') {
            out.push_back(cell);
            cell.clear();
        } else {
            cell.push_back(ch);
        }
    }
    out.push_back(cell);
    return out;
}

/// Reads a header row plus data rows. A zero-byte stream is an empty table.
inline CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw FormatError(fmt::format("csv line {}: expected {} fields, got {}", line_no, t.header.size(),
                                          cells.size()));
        t.rows.push_back(std::move(cells));
    }
    return t;
}

namespace plot_detail {

inline double number(const std::string& s, const char* what) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
        throw FormatError(fmt::format("csv: bad {} value '{}'", what, s));
    return v;
}

inline const char* colour(UpdateMethod m) {
    switch (m) {
        case UpdateMethod::A: return "#1f77b4";
        case UpdateMethod::B: return "#ff7f0e";
        case UpdateMethod::C: return "#2ca02c";
        case UpdateMethod::D: return "#d62728";
    }
    return "#000000";
}

struct Frame {
    double x0, y0, w, h;  // pixel box
};

}  // namespace plot_detail

struct MethodSeries {
    UpdateMethod method = UpdateMethod::A;
    std::vector<std::pair<double, double>> reward;  // (episode, mean total reward over rows)
    double success_rate = 0.0;
};

/// Groups an episode log by method. Rows sharing (method, episode), e.g. several seeds, are averaged.
inline std::vector<MethodSeries> summarize_episode_log(const CsvTable& t) {
    if (t.header.empty()) return {};
    const std::size_t c_ep = t.column("episode");
    const std::size_t c_m = t.column("method");
    const std::size_t c_r = t.column("episode_reward");
    const std::size_t c_s = t.column("success");

    struct Acc {
        std::map<double, std::pair<double, int>> by_episode;
        int successes = 0;
        int rows = 0;
    };
    std::map<UpdateMethod, Acc> acc;
    for (const auto& row : t.rows) {
        UpdateMethod m;
        try {
            m = parse_method(row[c_m]);
        } catch (const ConfigError&) {
            throw FormatError("csv: bad method value '" + row[c_m] + "'");
        }
        const double ep = plot_detail::number(row[c_ep], "episode");
        const double r = plot_detail::number(row[c_r], "episode_reward");
        const double s = plot_detail::number(row[c_s], "success");
        if (s != 0.0 && s != 1.0) throw FormatError("csv: success must be 0 or 1");
        Acc& a = acc[m];
        auto& cell = a.by_episode[ep];
        cell.first += r;
        cell.second += 1;
        a.successes += static_cast<int>(s);
        a.rows += 1;
    }
    std::vector<MethodSeries> out;
    for (const auto& [m, a] : acc) {
        MethodSeries s;
        s.method = m;
        for (const auto& [ep, sum] : a.by_episode) s.reward.emplace_back(ep, sum.first / sum.second);
        s.success_rate = static_cast<double>(a.successes) / a.rows;
        out.push_back(std::move(s));
    }
    return out;
}

inline std::string render_svg(const std::vector<MethodSeries>& series) {
    using plot_detail::Frame;
    constexpr double kWidth = 960;
    constexpr double kHeight = 420;
    const Frame line{60, 40, 560, 320};
    const Frame bars{700, 40, 220, 320};

    double ep_lo = std::numeric_limits<double>::infinity(), ep_hi = -ep_lo;
    double r_lo = ep_lo, r_hi = -ep_lo;
    for (const auto& s : series)
        for (const auto& [ep, r] : s.reward) {
            ep_lo = std::min(ep_lo, ep);
            ep_hi = std::max(ep_hi, ep);
            r_lo = std::min(r_lo, r);
            r_hi = std::max(r_hi, r);
        }
    if (!(ep_lo <= ep_hi)) {
        ep_lo = r_lo = 0.0;
        ep_hi = r_hi = 1.0;
    }
    if (ep_hi == ep_lo) ep_hi = ep_lo + 1.0;
    if (r_hi == r_lo) {
        r_lo -= 0.5;
        r_hi += 0.5;
    }
    auto px = [&](double ep) { return line.x0 + (ep - ep_lo) / (ep_hi - ep_lo) * line.w; };
    auto py = [&](double r) { return line.y0 + (r_hi - r) / (r_hi - r_lo) * line.h; };

    std::string svg = fmt::format(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
        "<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n",
        kWidth, kHeight);

    svg += "<g id=\"reward\">\n";
    svg += fmt::format("<text x=\"{}\" y=\"24\" font-size=\"14\">total reward per episode</text>\n", line.x0);
    svg += fmt::format("<rect class=\"axes\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                       line.x0, line.y0, line.w, line.h);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{:.4g}</text>\n", line.x0 - 4,
                       line.y0 + 4, r_hi);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{:.4g}</text>\n", line.x0 - 4,
                       line.y0 + line.h, r_lo);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\">{:.6g}</text>\n", line.x0, line.y0 + line.h + 16,
                       ep_lo);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{:.6g}</text>\n",
                       line.x0 + line.w, line.y0 + line.h + 16, ep_hi);
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        std::string pts;
        for (const auto& [ep, r] : s.reward) pts += fmt::format("{}{:.3f},{:.3f}", pts.empty() ? "" : " ", px(ep), py(r));
        svg += fmt::format("<polyline data-method=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\" points=\"{}\"/>\n",
                           to_char(s.method), plot_detail::colour(s.method), pts);
        svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{}\">{}</text>\n", line.x0 + 8 + 28 * i,
                           line.y0 + 16, plot_detail::colour(s.method), to_char(s.method));
    }
    svg += "</g>\n";

    svg += "<g id=\"success\">\n";
    svg += fmt::format("<text x=\"{}\" y=\"24\" font-size=\"14\">success rate</text>\n", bars.x0);
    svg += fmt::format("<rect class=\"axes\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                       bars.x0, bars.y0, bars.w, bars.h);
    const double slot = series.empty() ? bars.w : bars.w / static_cast<double>(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        const double h = s.success_rate * bars.h;
        const double x = bars.x0 + slot * i + slot * 0.15;
        svg += fmt::format("<rect class=\"bar\" data-method=\"{}\" data-value=\"{:.17g}\" x=\"{:.3f}\" y=\"{:.3f}\" "
                           "width=\"{:.3f}\" height=\"{:.3f}\" fill=\"{}\"/>\n",
                           to_char(s.method), s.success_rate, x, bars.y0 + bars.h - h, slot * 0.7, h,
                           plot_detail::colour(s.method));
        svg += fmt::format("<text x=\"{:.3f}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{} {:.2f}</text>\n",
                           x + slot * 0.35, bars.y0 + bars.h + 16, to_char(s.method), s.success_rate);
    }
    svg += "</g>\n</svg>\n";
    return svg;
}

/// Reads an episode log and writes the SVG. Malformed input raises FormatError before anything is written.
inline void emit_plots(const std::string& log_path, const std::string& out_path) {
    std::ifstream in(log_path, std::ios::binary);
    if (!in) throw FormatError("cannot open log '" + log_path + "'");
    const std::string svg = render_svg(summarize_episode_log(read_csv(in)));
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + out_path + "'");
    out << svg;
    if (!out) throw FormatError("write failed for '" + out_path + "'");
}

}  // namespace steady_replay
