#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "shelab/harness.hpp"

using namespace shelab;

namespace {

std::string csv_of(const Table& t) {
    std::ostringstream os;
    write_csv(os, t);
    return os.str();
}

std::vector<std::string> fields_of(const ExperimentConfig& c) {
    try {
        c.validate();
    } catch (const ConfigError& e) {
        return e.fields();
    }
    return {};
}

bool has(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

ExperimentConfig small_smallball() {
    ExperimentConfig c;
    c.subcommand = "smallball";
    c.grid = Grid{16, 16, 0.01};
    c.epsilons = {0.5, 0.6, 0.7, 0.8};
    c.n = 200;
    c.threads = 2;
    return c;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("shelab_test_" + name);
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("config round-trips through JSON") {
    ExperimentConfig c = small_smallball();
    c.sigma = {"tx_cos", {1.5, 0.25}};
    c.u0 = {"sin", {0.1, 1}};
    c.lambdas = {0.25, 0.5};
    c.levels = {2, 4};
    c.base_seed = 99;
    const std::string js = config_to_json(c);
    const ExperimentConfig back = config_from_json(js);
    CHECK(config_to_json(back) == js);
    CHECK(back.sigma == c.sigma);
    CHECK(back.epsilons == c.epsilons);
    CHECK(back.base_seed == 99);
    CHECK(nlohmann::json::parse(js)["schema_version"] == kSchemaVersion);
}

TEST_CASE("missing keys keep defaults, unknown keys and bad schema are rejected") {
    const ExperimentConfig c = config_from_json(R"({"schema_version": 1, "event": {"theta": 0.3}})");
    CHECK(c.theta == 0.3);
    CHECK(c.grid.n_x == ExperimentConfig{}.grid.n_x);
    CHECK_THROWS_AS(config_from_json(R"({"schema_version": 1, "theta": 0.3})"), DomainError);
    CHECK_THROWS_AS(config_from_json(R"({"schema_version": 7})"), DomainError);
    CHECK_THROWS(config_from_json("{not json"));
}

TEST_CASE("validation names every offending field") {
    ExperimentConfig c;
    CHECK(fields_of(c).empty());
    c.theta = 0.7;
    c.epsilons = {0.5, 1.5};
    c.grid.n_x = 48;
    const auto bad = fields_of(c);
    CHECK(has(bad, "theta"));
    CHECK(has(bad, "epsilons"));
    CHECK(has(bad, "grid.n_x"));
    CHECK(bad.size() == 3);

    ExperimentConfig d;
    d.input = "x.csv";
    CHECK(has(fields_of(d), "input"));
    d.subcommand = "exponent-fit";
    CHECK(fields_of(d).empty());
    d.method = "magic";
    CHECK(fields_of(d) == std::vector<std::string>{"method"});
}

TEST_CASE("CSV cells use %.17g and RFC-4180 quoting") {
    CHECK(format_cell(0.1) == "0.10000000000000001");
    CHECK(format_cell(std::int64_t{-3}) == "-3");
    CHECK(format_cell(std::string("plain")) == "plain");
    CHECK(format_cell(std::string("a,b")) == "\"a,b\"");
    CHECK(format_cell(std::string("say \"hi\"")) == "\"say \"\"hi\"\"\"");
    CHECK(format_cell(std::string("two\nlines")) == "\"two\nlines\"");
    const double x = 1.0 / 3.0;
    CHECK(std::stod(format_cell(x)) == x);
}

TEST_CASE("read_csv inverts write_csv") {
    Table t;
    t.columns = {"name", "value", "note"};
    t.rows.push_back({std::string("a,b"), 0.1, std::string("q\"uote")});
    t.rows.push_back({std::string(""), std::int64_t{7}, std::string("line\nbreak")});
    const std::string text = csv_of(t);
    std::istringstream is(text);
    const Table back = read_csv(is);
    CHECK(back.columns == t.columns);
    REQUIRE(back.rows.size() == 2);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t k = 0; k < 3; ++k) {
            const Cell& orig = t.rows[r][k];
            const std::string want =
                std::holds_alternative<std::string>(orig) ? std::get<std::string>(orig) : format_cell(orig);
            CHECK(std::get<std::string>(back.rows[r][k]) == want);
        }
    CHECK(csv_of(back) == text);

    std::istringstream ragged("a,b\n1,2,3\n");
    CHECK_THROWS(read_csv(ragged));
    std::istringstream open_quote("a\n\"oops\n");
    CHECK_THROWS(read_csv(open_quote));
    std::istringstream blank("a,b\r\n1,2\r\n\r\n3,4");
    const Table bt = read_csv(blank);
    CHECK(bt.rows.size() == 2);
    CHECK(std::get<std::string>(bt.rows[1][1]) == "4");
}

TEST_CASE("error_json carries type, message and fields") {
    const auto j = nlohmann::json::parse(error_json("ConfigError", "invalid configuration: theta", {"theta"}));
    CHECK(j["error"]["type"] == "ConfigError");
    CHECK(j["error"]["fields"][0] == "theta");
    CHECK(j["error"]["message"].get<std::string>().find("theta") != std::string::npos);
}

TEST_CASE("emit_plot_data: view columns, empty record, missing column") {
    for (auto v : {PlotView::smallball_curve, PlotView::exponent_fit, PlotView::tail_curve, PlotView::picard_decay}) {
        const Table t = emit_plot_data(ResultRecord{}, v);
        CHECK(t.columns == view_columns(v));
        CHECK(t.rows.empty());
        CHECK(csv_of(t).find('\n') == csv_of(t).size() - 1);
    }
    CHECK(view_columns(PlotView::smallball_curve) ==
          std::vector<std::string>{"epsilon", "p_hat", "ci_lo", "ci_hi", "method"});
    ResultRecord r;
    r.table.columns = {"epsilon", "p_hat"};
    r.table.rows.push_back({0.5, 0.1});
    CHECK_THROWS_AS(emit_plot_data(r, PlotView::smallball_curve), DomainError);
    CHECK_THROWS(plot_view_from_string("histogram"));
}

TEST_CASE("smallball run: column order, byte-identical rerun, thread invariance") {
    ExperimentConfig c = small_smallball();
    const ResultRecord a = run(c);
    const std::vector<std::string> cols{"event_kind", "epsilon",  "theta", "T",       "method",
                                        "n",          "p_hat",    "stderr", "ci_lo",  "ci_hi",
                                        "seed_base",  "stream_begin", "stream_end", "ess", "low_confidence",
                                        "extinctions"};
    CHECK(a.table.columns == cols);
    CHECK(a.table.rows.size() == c.epsilons.size());
    CHECK(a.view == "smallball_curve");
    const ResultRecord b = run(c);
    CHECK(csv_of(a.table) == csv_of(b.table));
    CHECK(a.config_digest == b.config_digest);
    CHECK(a.input_hash == b.input_hash);
    c.threads = 1;
    const ResultRecord d = run(c);
    CHECK(csv_of(a.table) == csv_of(d.table));

    const Table view = emit_plot_data(a, PlotView::smallball_curve);
    CHECK(view.rows.size() == c.epsilons.size());
    // p_hat non-decreasing in epsilon
    const std::size_t k = a.table.column_index("p_hat");
    for (std::size_t r = 1; r < a.table.rows.size(); ++r)
        CHECK(std::get<double>(a.table.rows[r][k]) >= std::get<double>(a.table.rows[r - 1][k]));
}

TEST_CASE("seed enters the digest and the output") {
    ExperimentConfig c = small_smallball();
    const ResultRecord a = run(c);
    c.base_seed = 2;
    const ResultRecord b = run(c);
    CHECK(a.config_digest != b.config_digest);
    CHECK(csv_of(a.table) != csv_of(b.table));
}

TEST_CASE("exponent-fit from a persisted smallball CSV") {
    ExperimentConfig c = small_smallball();
    c.n = 400;
    const ResultRecord sb = run(c);
    const auto base = temp_path("sb").string();
    const auto written = persist(sb, base);
    CHECK(std::find(written.begin(), written.end(), base + ".csv") != written.end());

    ExperimentConfig f;
    f.subcommand = "exponent-fit";
    f.input = base + ".csv";
    const ResultRecord fit = run(f);
    CHECK(fit.view == "exponent_fit");
    CHECK(fit.table.rows.size() == c.epsilons.size());

    // independent weighted least squares over rows with 0 < p_hat < 1, delta-method weights
    const std::size_t ke = sb.table.column_index("epsilon"), kp = sb.table.column_index("p_hat"),
                      ks = sb.table.column_index("stderr");
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0, used = 0;
    for (const auto& row : sb.table.rows) {
        const double p = std::get<double>(row[kp]);
        if (p <= 0.0 || p >= 1.0) continue;
        const double x = std::log(std::get<double>(row[ke]));
        const double y = std::log(-std::log(p));
        const double sd = std::get<double>(row[ks]) / (p * -std::log(p));
        const double w = 1.0 / (sd * sd);
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
        used += 1;
    }
    REQUIRE(used >= 2);
    const double slope = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
    const double n = used;
    CHECK(fit.metadata.at("slope") == doctest::Approx(slope).epsilon(1e-12));
    CHECK(fit.metadata.at("rows_used") == n);

    const auto side = nlohmann::json::parse(fit_sidecar_json(fit));
    CHECK(side["slope"].get<double>() == doctest::Approx(slope).epsilon(1e-12));
    CHECK(side["config_digest"] == fit.config_digest);

    // the input bytes enter the input hash; a trailing blank line parses
    {
        std::ofstream os(f.input, std::ios::app);
        os << "\n";
    }
    const ResultRecord again = run(f);
    CHECK(again.input_hash != fit.input_hash);
    CHECK(again.config_digest == fit.config_digest);
    CHECK(again.metadata.at("slope") == fit.metadata.at("slope"));
    for (const auto& p : written) std::filesystem::remove(p);
}

TEST_CASE("exponent-fit input lacking columns names them") {
    const auto path = temp_path("bad.csv").string();
    {
        std::ofstream os(path);
        os << "epsilon,q\n0.5,0.1\n";
    }
    ExperimentConfig f;
    f.subcommand = "exponent-fit";
    f.input = path;
    CHECK_THROWS_AS(run(f), ConfigError);
    try {
        run(f);
    } catch (const ConfigError& e) {
        CHECK(has(e.fields(), "p_hat"));
    }
    std::filesystem::remove(path);
}

TEST_CASE("verify-kernel and verify-covariance report ok") {
    ExperimentConfig c;
    c.subcommand = "verify-kernel";
    const ResultRecord k = run(c);
    CHECK(k.ok);
    CHECK_FALSE(k.table.rows.empty());
    c.subcommand = "verify-covariance";
    c.theta = 0.35;
    c.epsilons = {0.4};
    c.c1 = 4.0;
    const ResultRecord v = run(c);
    CHECK(v.ok);
    CHECK(v.metadata.at("norm_A") < 1.0 / 3.0);
}

TEST_CASE("record JSON echoes config and schema") {
    ExperimentConfig c;
    c.subcommand = "verify-kernel";
    const ResultRecord r = run(c);
    const auto j = nlohmann::json::parse(record_to_json(r));
    CHECK(j["schema_version"] == kSchemaVersion);
    CHECK(j.contains("config"));
    CHECK(r.config_digest.size() == 40);
    CHECK(sha1_hex("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
    CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    CHECK(git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

}  // TEST_SUITE
