#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "steady_replay/harness/plot.hpp"

using namespace steady_replay;

namespace {

const char* kHeader =
    "episode,method,stored_steps,attempted_steps,episode_reward,success,mean_critic_loss,mean_actor_objective,"
    "noise_scale,wall_ms\n";

std::string row(int ep, char m, double reward, int success) {
    std::ostringstream s;
    s << ep << ',' << m << ",10,10," << reward << ',' << success << ",0,0,0.1,0\n";
    return s.str();
}

std::string render(const std::string& csv) {
    std::istringstream in(csv);
    return render_svg(summarize_episode_log(read_csv(in)));
}

std::vector<std::string> polylines(const std::string& svg) {
    std::vector<std::string> out;
    const std::regex re("<polyline[^>]*points=\"([^\"]*)\"");
    for (std::sregex_iterator it(svg.begin(), svg.end(), re), end; it != end; ++it) out.push_back((*it)[1]);
    return out;
}

std::vector<std::pair<double, double>> points(const std::string& attr) {
    std::vector<std::pair<double, double>> out;
    std::istringstream s(attr);
    std::string pair;
    while (s >> pair) {
        const auto comma = pair.find(',');
        out.emplace_back(std::stod(pair.substr(0, comma)), std::stod(pair.substr(comma + 1)));
    }
    return out;
}

}  // namespace

TEST(Plot, EmptyLogDrawsAxesOnly) {
    for (const std::string& csv : {std::string(), std::string(kHeader)}) {
        const std::string svg = render(csv);
        EXPECT_NE(svg.find("<svg"), std::string::npos);
        EXPECT_NE(svg.find("class=\"axes\""), std::string::npos);
        EXPECT_TRUE(polylines(svg).empty());
        EXPECT_EQ(svg.find("class=\"bar\""), std::string::npos);
    }
}

TEST(Plot, OnePolylinePerMethod) {
    std::string csv = kHeader;
    for (char m : std::string("ABCD"))
        for (int ep = 0; ep < 5; ++ep) csv += row(ep, m, -ep * 0.5, ep % 2);
    const std::string svg = render(csv);
    EXPECT_EQ(polylines(svg).size(), 4u);
    for (char m : std::string("ABCD"))
        EXPECT_NE(svg.find(std::string("<polyline data-method=\"") + m + "\""), std::string::npos);
}

TEST(Plot, MonotoneRewardGivesMonotoneY) {
    std::string csv = kHeader;
    for (int ep = 0; ep < 30; ++ep) csv += row(ep, 'C', -3.0 + 0.1 * ep, 0);
    const auto lines = polylines(render(csv));
    ASSERT_EQ(lines.size(), 1u);
    const auto pts = points(lines[0]);
    ASSERT_EQ(pts.size(), 30u);
    for (std::size_t i = 1; i < pts.size(); ++i) {
        EXPECT_GT(pts[i].first, pts[i - 1].first);
        EXPECT_LT(pts[i].second, pts[i - 1].second);
    }
}

TEST(Plot, SeedsAveragedAndSuccessBars) {
    std::string csv = kHeader;
    csv += row(0, 'A', -1.0, 1);
    csv += row(0, 'A', -3.0, 0);
    csv += row(1, 'A', -2.0, 1);
    csv += row(1, 'A', -2.0, 1);
    std::istringstream in(csv);
    const auto series = summarize_episode_log(read_csv(in));
    ASSERT_EQ(series.size(), 1u);
    ASSERT_EQ(series[0].reward.size(), 2u);
    EXPECT_EQ(series[0].reward[0].second, -2.0);
    EXPECT_EQ(series[0].success_rate, 0.75);
    const std::string svg = render_svg(series);
    EXPECT_NE(svg.find("data-value=\"0.75\""), std::string::npos);
}

TEST(Plot, MalformedInput) {
    EXPECT_THROW(render(std::string(kHeader) + "1,A,10\n"), FormatError);
    EXPECT_THROW(render(std::string(kHeader) + row(0, 'Z', 1.0, 0)), FormatError);
    EXPECT_THROW(render(std::string(kHeader) + "x,A,10,10,1,0,0,0,0,0\n"), FormatError);
    EXPECT_THROW(render(std::string(kHeader) + "0,A,10,10,1,2,0,0,0,0\n"), FormatError);
    EXPECT_THROW(render("a,b,c\n1,2,3\n"), FormatError);
    EXPECT_THROW(render(std::string(kHeader) + "0,\"A\",10,10,1,0,0,0,0,0\n"), FormatError);
}

TEST(Plot, EmitWritesFile) {
    const auto dir = std::filesystem::temp_directory_path() / "steady_replay_plot";
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / "log.csv");
        f << kHeader << row(0, 'B', -1, 0) << row(1, 'B', -0.5, 1);
    }
    emit_plots((dir / "log.csv").string(), (dir / "out.svg").string());
    std::ifstream in(dir / "out.svg");
    const std::string svg((std::istreambuf_iterator<char>(in)), {});
    EXPECT_EQ(polylines(svg).size(), 1u);
    EXPECT_THROW(emit_plots((dir / "missing.csv").string(), (dir / "x.svg").string()), FormatError);
    std::filesystem::remove_all(dir);
}
