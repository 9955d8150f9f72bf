#include "shelab/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "shelab/gaussian_analysis.hpp"
#include "shelab/localization.hpp"
#include "shelab/parallel.hpp"
#include "shelab/quadrature.hpp"

namespace shelab {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const std::set<std::string> kSubcommands = {"simulate",  "smallball", "exponent-fit",  "tail-curve",
                                            "localize",  "mollify",   "verify-kernel", "verify-covariance"};

bool power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

template <class F>
bool throws(F&& f) {
    try {
        f();
    } catch (const std::exception&) {
        return true;
    }
    return false;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
    std::vector<std::string> bad;
    auto check = [&](bool ok, const char* field) {
        if (!ok) bad.emplace_back(field);
    };
    check(kSubcommands.count(subcommand) == 1, "subcommand");
    check(grid.n_x >= 8 && power_of_two(grid.n_x), "grid.n_x");
    check(grid.n_t >= 8, "grid.n_t");
    check(grid.T > 0.0 && std::isfinite(grid.T), "grid.T");
    check(theta > 0.0 && theta <= 0.5, "theta");
    check(!epsilons.empty() && std::all_of(epsilons.begin(), epsilons.end(),
                                           [](double e) { return e > 0.0 && e < 1.0; }),
          "epsilons");
    check(!throws([&] { metric_from_string(metric); }), "metric");
    check(!throws([&] { event_kind_from_string(event); }), "event");
    check(family == "spatial" || family == "temporal", "family");
    check(stride >= 1, "stride");
    check(point < grid.n_x, "point");
    check(c_block > 0.0, "c_block");
    check(method == "plain" || method == "splitting" || method == "importance", "method");
    check(solver == "fd" || solver == "spectral", "solver");
    check(n >= 1, "n");
    check(m >= 2, "m");
    check(R >= 2, "R");
    check(format == "csv" || format == "binary", "format");
    check(input.empty() || subcommand == "exponent-fit", "input");
    check(!throws([&] { SigmaSpec::from_preset(sigma.name, sigma.params).validate(grid.T); }), "sigma");
    check(!throws([&] { initial_profile(); }), "u0");
    check(t1 >= 0.0, "t1");
    check(beta > 0.0, "beta");
    check(std::all_of(betas.begin(), betas.end(), [](double b) { return b > 0.0; }), "betas");
    check(p >= 1.0, "p");
    check(!throws([&] { tail_statistic_from_string(tail_statistic); }), "tail_statistic");
    check(alpha > 0.0, "alpha");
    check(box_a >= 0.0 && box_a < 1.0, "box_a");
    check(!lambdas.empty(), "lambdas");
    check(holder_gamma > 0.0 && holder_gamma <= 1.0, "holder_gamma");
    check(holder_beta > 0.0 && holder_beta <= 1.0, "holder_beta");
    check(!levels.empty() && std::all_of(levels.begin(), levels.end(), [](std::size_t v) { return v >= 1; }),
          "levels");
    check(c0 > 0.0, "c0");
    check(c1 > 0.0, "c1");
    check(!throws([&] { kernel.validate(); }), "kernel");
    if (!bad.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& f : bad) msg += " " + f;
        throw ConfigError(msg, bad);
    }
}

SigmaSpec ExperimentConfig::sigma_spec() const { return SigmaSpec::from_preset(sigma.name, sigma.params); }

std::vector<double> ExperimentConfig::initial_profile() const {
    const std::size_t nx = grid.n_x;
    std::vector<double> u(nx, 0.0);
    const auto& pr = u0.params;
    auto param = [&](std::size_t i, double def) { return i < pr.size() ? pr[i] : def; };
    if (u0.name == "zero") return u;
    if (u0.name == "const") {
        std::fill(u.begin(), u.end(), param(0, 0.0));
        return u;
    }
    if (u0.name == "sin" || u0.name == "cos") {
        const double a = param(0, 1.0);
        const double k = param(1, 1.0);
        require(k == std::floor(k), "u0 mode must be an integer");
        for (std::size_t j = 0; j < nx; ++j) {
            const double arg = 2.0 * std::numbers::pi * k * static_cast<double>(j) / static_cast<double>(nx);
            u[j] = a * (u0.name == "sin" ? std::sin(arg) : std::cos(arg));
        }
        return u;
    }
    throw DomainError("unknown u0 preset: " + u0.name);
}

EventSpec ExperimentConfig::event_spec(double epsilon) const {
    EventSpec s;
    s.kind = event_kind_from_string(event);
    s.epsilon = epsilon;
    s.theta = theta;
    s.metric = metric_from_string(metric);
    s.stride = stride;
    s.point = point;
    s.family = family == "temporal" ? BlockFamily::temporal : BlockFamily::spatial;
    s.block_steps = block_steps;
    s.c_block = c_block;
    return s;
}

EnsembleConfig ExperimentConfig::ensemble() const {
    EnsembleConfig e;
    e.grid = grid;
    e.sigma = sigma_spec();
    e.u0 = initial_profile();
    e.n = n;
    e.base_seed = base_seed;
    e.stream_offset = stream_offset;
    e.solver = solver == "spectral" ? SolverKind::spectral : SolverKind::fd;
    e.enforce_hypotheses = enforce_hypotheses;
    return e;
}

std::size_t Table::column_index(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    return it == columns.end() ? std::string::npos : static_cast<std::size_t>(it - columns.begin());
}

// ---- serialization ----------------------------------------------------------

std::string config_to_json(const ExperimentConfig& c, int indent) {
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["subcommand"] = c.subcommand;
    j["grid"] = {{"n_x", c.grid.n_x}, {"n_t", c.grid.n_t}, {"T", c.grid.T}};
    j["sigma"] = {{"preset", c.sigma.name}, {"params", c.sigma.params}};
    j["u0"] = {{"preset", c.u0.name}, {"params", c.u0.params}};
    j["event"] = {{"kind", c.event},          {"theta", c.theta},   {"epsilons", c.epsilons},
                  {"metric", c.metric},       {"stride", c.stride}, {"point", c.point},
                  {"family", c.family},       {"block_steps", c.block_steps}, {"c_block", c.c_block}};
    j["estimator"] = {{"method", c.method}, {"solver", c.solver}, {"n", c.n}, {"m", c.m}, {"R", c.R},
                      {"enforce_hypotheses", c.enforce_hypotheses}, {"t1", c.t1}};
    j["seeds"] = {{"base_seed", c.base_seed}, {"stream_offset", c.stream_offset}};
    j["threads"] = c.threads;
    j["out"] = c.out;
    j["format"] = c.format;
    j["input"] = c.input;
    j["localize"] = {{"beta", c.beta}, {"betas", c.betas}, {"max_level", c.max_level}, {"p", c.p},
                     {"enforce_window", c.enforce_window}};
    j["tail"] = {{"statistic", c.tail_statistic}, {"alpha", c.alpha}, {"a", c.box_a}, {"lambdas", c.lambdas}};
    j["mollify"] = {{"gamma", c.holder_gamma}, {"beta", c.holder_beta}, {"levels", c.levels}};
    j["covariance"] = {{"c0", c.c0}, {"c1", c.c1}};
    j["kernel"] = {{"periodization_terms", c.kernel.periodization_terms},
                   {"quad_abs_tol", c.kernel.quad_abs_tol},
                   {"quad_max_subdiv", c.kernel.quad_max_subdiv}};
    return j.dump(indent);
}

namespace {

class Reader {
public:
    explicit Reader(std::vector<std::string>& bad) : bad_(bad) {}

    template <class T>
    void get(const json& obj, const std::string& prefix, const char* key, T& dst) {
        if (!obj.contains(key)) return;
        try {
            dst = obj.at(key).get<T>();
        } catch (const json::exception&) {
            bad_.push_back(prefix + key);
        }
    }

    void known(const json& obj, const std::string& prefix, std::initializer_list<const char*> keys) {
        if (!obj.is_object()) {
            bad_.push_back(prefix.empty() ? "<root>" : prefix.substr(0, prefix.size() - 1));
            return;
        }
        for (const auto& [k, v] : obj.items())
            if (std::none_of(keys.begin(), keys.end(), [&](const char* s) { return k == s; }))
                bad_.push_back(prefix + k);
    }

private:
    std::vector<std::string>& bad_;
};

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what(), {"<root>"});
    }
    std::vector<std::string> bad;
    Reader r(bad);
    r.known(j, "", {"schema_version", "subcommand", "grid", "sigma", "u0", "event", "estimator", "seeds", "threads",
                    "out", "format", "input", "localize", "tail", "mollify", "covariance", "kernel"});
    if (!bad.empty() && bad.front() == "<root>") throw ConfigError("config must be a JSON object", bad);
    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer() ||
        j["schema_version"].get<int>() != kSchemaVersion)
        bad.emplace_back("schema_version");

    ExperimentConfig c;
    r.get(j, "", "subcommand", c.subcommand);
    r.get(j, "", "threads", c.threads);
    r.get(j, "", "out", c.out);
    r.get(j, "", "format", c.format);
    r.get(j, "", "input", c.input);
    auto section = [&](const char* name, std::initializer_list<const char*> keys, auto&& body) {
        if (!j.contains(name)) return;
        const std::string prefix = std::string(name) + ".";
        r.known(j[name], prefix, keys);
        if (j[name].is_object()) body(j[name], prefix);
    };
    section("grid", {"n_x", "n_t", "T"}, [&](const json& o, const std::string& p) {
        r.get(o, p, "n_x", c.grid.n_x);
        r.get(o, p, "n_t", c.grid.n_t);
        r.get(o, p, "T", c.grid.T);
    });
    section("sigma", {"preset", "params"}, [&](const json& o, const std::string& p) {
        r.get(o, p, "preset", c.sigma.name);
        r.get(o, p, "params", c.sigma.params);
    });
    section("u0", {"preset", "params"}, [&](const json& o, const std::string& p) {
        r.get(o, p, "preset", c.u0.name);
        r.get(o, p, "params", c.u0.params);
    });
    section("event",
            {"kind", "theta", "epsilons", "metric", "stride", "point", "family", "block_steps", "c_block"},
            [&](const json& o, const std::string& p) {
                r.get(o, p, "kind", c.event);
                r.get(o, p, "theta", c.theta);
                r.get(o, p, "epsilons", c.epsilons);
                r.get(o, p, "metric", c.metric);
                r.get(o, p, "stride", c.stride);
                r.get(o, p, "point", c.point);
                r.get(o, p, "family", c.family);
                r.get(o, p, "block_steps", c.block_steps);
                r.get(o, p, "c_block", c.c_block);
            });
    section("estimator", {"method", "solver", "n", "m", "R", "enforce_hypotheses", "t1"},
            [&](const json& o, const std::string& p) {
                r.get(o, p, "method", c.method);
                r.get(o, p, "solver", c.solver);
                r.get(o, p, "n", c.n);
                r.get(o, p, "m", c.m);
                r.get(o, p, "R", c.R);
                r.get(o, p, "enforce_hypotheses", c.enforce_hypotheses);
                r.get(o, p, "t1", c.t1);
            });
    section("seeds", {"base_seed", "stream_offset"}, [&](const json& o, const std::string& p) {
        r.get(o, p, "base_seed", c.base_seed);
        r.get(o, p, "stream_offset", c.stream_offset);
    });
    section("localize", {"beta", "betas", "max_level", "p", "enforce_window"},
            [&](const json& o, const std::string& p) {
                r.get(o, p, "beta", c.beta);
                r.get(o, p, "betas", c.betas);
                r.get(o, p, "max_level", c.max_level);
                r.get(o, p, "p", c.p);
                r.get(o, p, "enforce_window", c.enforce_window);
            });
    section("tail", {"statistic", "alpha", "a", "lambdas"}, [&](const json& o, const std::string& p) {
        r.get(o, p, "statistic", c.tail_statistic);
        r.get(o, p, "alpha", c.alpha);
        r.get(o, p, "a", c.box_a);
        r.get(o, p, "lambdas", c.lambdas);
    });
    section("mollify", {"gamma", "beta", "levels"}, [&](const json& o, const std::string& p) {
        r.get(o, p, "gamma", c.holder_gamma);
        r.get(o, p, "beta", c.holder_beta);
        r.get(o, p, "levels", c.levels);
    });
    section("covariance", {"c0", "c1"}, [&](const json& o, const std::string& p) {
        r.get(o, p, "c0", c.c0);
        r.get(o, p, "c1", c.c1);
    });
    section("kernel", {"periodization_terms", "quad_abs_tol", "quad_max_subdiv"},
            [&](const json& o, const std::string& p) {
                r.get(o, p, "periodization_terms", c.kernel.periodization_terms);
                r.get(o, p, "quad_abs_tol", c.kernel.quad_abs_tol);
                r.get(o, p, "quad_max_subdiv", c.kernel.quad_max_subdiv);
            });
    if (!bad.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& f : bad) msg += " " + f;
        throw ConfigError(msg, bad);
    }
    return c;
}

std::string sha1_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha1(), nullptr) != 1)
        throw std::runtime_error("sha1 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string git_blob_hash(const std::string& bytes) {
    std::string blob = "blob " + std::to_string(bytes.size());
    blob.push_back('\0');
    return sha1_hex(blob + bytes);
}

// ---- CSV ---------------------------------------------------------------------

std::string format_cell(const Cell& c) {
    if (const double* d = std::get_if<double>(&c)) {
        if (std::isnan(*d)) return "nan";
        if (std::isinf(*d)) return *d > 0 ? "inf" : "-inf";
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", *d);
        return buf;
    }
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    const std::string& s = std::get<std::string>(c);
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
    }
    return q + "\"";
}

void write_csv(std::ostream& os, const Table& table) {
    for (std::size_t i = 0; i < table.columns.size(); ++i)
        os << (i ? "," : "") << format_cell(Cell{table.columns[i]});
    os << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_cell(row[i]);
        os << '\n';
    }
}

Table read_csv(std::istream& is) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> rec;
    std::string field;
    bool quoted = false, any = false;
    char ch;
    auto end_field = [&] {
        rec.push_back(field);
        field.clear();
    };
    while (is.get(ch)) {
        if (!quoted && (ch == '\n' || ch == '\r')) {
            if (ch == '\r' && is.peek() == '\n') is.get(ch);
            if (!any) continue;  // blank line
            end_field();
            records.push_back(std::move(rec));
            rec.clear();
            any = false;
            continue;
        }
        any = true;
        if (quoted) {
            if (ch == '"') {
                if (is.peek() == '"') {
                    is.get(ch);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            end_field();
        } else {
            field += ch;
        }
    }
    if (quoted) throw DomainError("csv: unterminated quoted field");
    if (any) {
        end_field();
        records.push_back(std::move(rec));
    }
    Table t;
    if (records.empty()) return t;
    t.columns = records.front();
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != t.columns.size())
            throw DomainError("csv: row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                              " fields, header has " + std::to_string(t.columns.size()));
        std::vector<Cell> row(records[r].begin(), records[r].end());
        t.rows.push_back(std::move(row));
    }
    return t;
}

PlotView plot_view_from_string(const std::string& s) {
    if (s == "smallball_curve") return PlotView::smallball_curve;
    if (s == "exponent_fit") return PlotView::exponent_fit;
    if (s == "tail_curve") return PlotView::tail_curve;
    if (s == "picard_decay") return PlotView::picard_decay;
    throw DomainError("unknown plot view: " + s);
}

std::vector<std::string> view_columns(PlotView view) {
    switch (view) {
        case PlotView::smallball_curve: return {"epsilon", "p_hat", "ci_lo", "ci_hi", "method"};
        case PlotView::exponent_fit: return {"epsilon", "p_hat", "stderr", "log_epsilon", "log_neg_log_p"};
        case PlotView::tail_curve: return {"lambda", "p_hat", "ci_lo", "ci_hi", "n"};
        case PlotView::picard_decay: return {"beta", "level", "error", "stderr"};
    }
    return {};
}

Table emit_plot_data(const ResultRecord& record, PlotView view) {
    Table out;
    out.columns = view_columns(view);
    if (record.table.columns.empty() && record.table.rows.empty()) return out;
    std::vector<std::size_t> idx;
    for (const auto& col : out.columns) {
        const std::size_t k = record.table.column_index(col);
        if (k == std::string::npos) throw DomainError("record has no column '" + col + "' for this view");
        idx.push_back(k);
    }
    for (const auto& row : record.table.rows) {
        std::vector<Cell> r;
        for (std::size_t k : idx) r.push_back(row.at(k));
        out.rows.push_back(std::move(r));
    }
    return out;
}

std::string fit_sidecar_json(const ResultRecord& record) {
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["view"] = "exponent_fit";
    for (const char* key : {"slope", "intercept", "r2", "rows_used"}) {
        const auto it = record.metadata.find(key);
        if (it == record.metadata.end()) throw DomainError(std::string("record has no fit metadata '") + key + "'");
        j[key] = it->second;
    }
    j["config_digest"] = record.config_digest;
    j["warnings"] = record.warnings;
    return j.dump(2);
}

std::string record_to_json(const ResultRecord& rec) {
    ordered_json j;
    j["schema_version"] = rec.schema_version;
    j["ok"] = rec.ok;
    j["config_digest"] = rec.config_digest;
    j["input_hash"] = rec.input_hash;
    j["created"] = rec.created;
    j["view"] = rec.view;
    j["config"] = ordered_json::parse(config_to_json(rec.config, -1));
    j["metadata"] = rec.metadata;
    j["warnings"] = rec.warnings;
    j["columns"] = rec.table.columns;
    ordered_json rows = ordered_json::array();
    for (const auto& row : rec.table.rows) {
        ordered_json r = ordered_json::array();
        for (const auto& c : row) std::visit([&](const auto& v) { r.push_back(v); }, c);
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    return j.dump(2);
}

std::string error_json(const std::string& type, const std::string& message, const std::vector<std::string>& fields) {
    ordered_json j;
    j["error"] = {{"type", type}, {"message", message}, {"fields", fields}};
    return j.dump();
}

std::vector<std::string> persist(const ResultRecord& record, const std::string& out) {
    std::vector<std::string> written;
    auto write = [&](const std::string& path, const std::string& body) {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + path + " for writing");
        f << body;
        written.push_back(path);
    };
    std::ostringstream csv;
    write_csv(csv, record.table);
    write(out + ".csv", csv.str());
    write(out + ".json", record_to_json(record));
    if (!record.view.empty()) {
        const PlotView v = plot_view_from_string(record.view);
        std::ostringstream view;
        write_csv(view, emit_plot_data(record, v));
        write(out + "." + record.view + ".csv", view.str());
        if (v == PlotView::exponent_fit) write(out + ".fit.json", fit_sidecar_json(record));
    }
    return written;
}

// ---- subcommands -------------------------------------------------------------

namespace {

using Row = std::vector<Cell>;

Cell I(std::size_t v) { return static_cast<std::int64_t>(v); }

std::string short_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

void run_simulate(const ExperimentConfig& c, ResultRecord& rec) {
    const EnsembleConfig e = c.ensemble();
    const auto paths = parallel_map<FieldPath>(c.n, [&](std::size_t k) { return ensemble_path(e, k); });
    const Grid& g = c.grid;
    if (c.format == "binary") {
        require(!c.out.empty(), "binary output needs --out");
        const std::string path = c.out + ".bin";
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + path);
        for (const auto& p : paths)
            f.write(reinterpret_cast<const char*>(p.values.flat().data()),
                    static_cast<std::streamsize>(p.values.flat().size() * sizeof(double)));
        rec.metadata["paths"] = static_cast<double>(c.n);
        rec.metadata["rows"] = static_cast<double>(g.n_t + 1);
        rec.metadata["cols"] = static_cast<double>(g.n_x);
        rec.table.columns = {"path", "stream_id", "binary_offset"};
        const std::size_t bytes = (g.n_t + 1) * g.n_x * sizeof(double);
        for (std::size_t k = 0; k < c.n; ++k) rec.table.rows.push_back({I(k), I(paths[k].seed.stream_id), I(k * bytes)});
        return;
    }
    rec.table.columns = {"path", "stream_id", "t_index", "t", "x_index", "x", "u"};
    for (std::size_t k = 0; k < c.n; ++k)
        for (std::size_t r = 0; r <= g.n_t; ++r)
            for (std::size_t j = 0; j < g.n_x; ++j)
                rec.table.rows.push_back({I(k), I(paths[k].seed.stream_id), I(r), g.time(r), I(j), g.space(j),
                                          paths[k].values(r, j)});
}

std::vector<MCEstimate> smallball_sweep(const ExperimentConfig& c) {
    const EnsembleConfig e = c.ensemble();
    std::vector<MCEstimate> out;
    const EventKind kind = event_kind_from_string(c.event);
    const bool reusable = c.block_steps > 0 || !block_decomposable(kind) || kind == EventKind::spatial_sup;
    if (c.method == "plain") {
        require(c.n >= 100, "plain estimation needs n >= 100");
        if (reusable) {
            // one ensemble, thresholded at every eps; hypotheses are checked at the smallest eps
            const double eps_min = *std::min_element(c.epsilons.begin(), c.epsilons.end());
            const auto stats = plain_statistics(c.event_spec(eps_min), e);
            for (double eps : c.epsilons) out.push_back(estimate_from_statistics(stats, eps, e));
        } else {
            for (double eps : c.epsilons) out.push_back(estimate_plain(c.event_spec(eps), e));
        }
    } else if (c.method == "splitting") {
        for (double eps : c.epsilons) out.push_back(estimate_splitting(c.event_spec(eps), e, c.m, c.R).estimate);
    } else {
        require(c.t1 > 0.0, "importance sampling needs estimator.t1 > 0");
        const GirsanovTilt tilt(c.grid, e.initial_profile(), c.t1, e.sigma);
        for (double eps : c.epsilons) out.push_back(estimate_importance(c.event_spec(eps), tilt, e));
    }
    return out;
}

void run_smallball(const ExperimentConfig& c, ResultRecord& rec) {
    const auto ests = smallball_sweep(c);
    rec.view = "smallball_curve";
    rec.table.columns = {"event_kind", "epsilon", "theta", "T",       "method",     "n",          "p_hat",
                         "stderr",     "ci_lo",   "ci_hi", "seed_base", "stream_begin", "stream_end", "ess",
                         "low_confidence", "extinctions"};
    for (std::size_t i = 0; i < ests.size(); ++i) {
        const auto& e = ests[i];
        rec.table.rows.push_back({c.event, c.epsilons[i], c.theta, c.grid.T, e.method, I(e.n), e.p_hat, e.stderr_,
                                  e.ci_lo, e.ci_hi, I(e.seed_base), I(e.stream_begin), I(e.stream_end), e.ess,
                                  I(e.low_confidence ? 1 : 0), I(e.extinctions)});
        if (e.low_confidence) rec.warnings.push_back("low effective sample size at eps = " + short_num(c.epsilons[i]));
        if (e.extinctions) rec.warnings.push_back("splitting extinctions at eps = " + short_num(c.epsilons[i]));
    }
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DomainError("cannot read input file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

double parse_number(const std::string& s, const std::string& what) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw DomainError("input csv: '" + s + "' in column " + what + " is not a number");
    return v;
}

// (epsilon, estimate) pairs either from a smallball CSV or from a fresh sweep
std::vector<std::pair<double, MCEstimate>> fit_inputs(const ExperimentConfig& c) {
    std::vector<std::pair<double, MCEstimate>> out;
    if (c.input.empty()) {
        const auto ests = smallball_sweep(c);
        for (std::size_t i = 0; i < ests.size(); ++i) out.emplace_back(c.epsilons[i], ests[i]);
        return out;
    }
    std::istringstream is(read_file(c.input));
    const Table t = read_csv(is);
    std::vector<std::string> missing;
    for (const char* col : {"epsilon", "p_hat", "stderr"})
        if (t.column_index(col) == std::string::npos) missing.emplace_back(col);
    if (!missing.empty()) throw ConfigError("input csv lacks required columns", missing);
    auto text = [&](const std::vector<Cell>& row, const char* col) -> std::string {
        const std::size_t k = t.column_index(col);
        return k == std::string::npos ? std::string() : std::get<std::string>(row[k]);
    };
    for (const auto& row : t.rows) {
        MCEstimate e;
        e.p_hat = parse_number(text(row, "p_hat"), "p_hat");
        e.stderr_ = parse_number(text(row, "stderr"), "stderr");
        if (t.column_index("ci_lo") != std::string::npos) e.ci_lo = parse_number(text(row, "ci_lo"), "ci_lo");
        if (t.column_index("ci_hi") != std::string::npos) e.ci_hi = parse_number(text(row, "ci_hi"), "ci_hi");
        if (t.column_index("method") != std::string::npos) e.method = text(row, "method");
        out.emplace_back(parse_number(text(row, "epsilon"), "epsilon"), e);
    }
    return out;
}

void run_exponent_fit(const ExperimentConfig& c, ResultRecord& rec) {
    const auto inputs = fit_inputs(c);
    std::vector<FitRow> rows;
    for (const auto& [eps, e] : inputs) rows.push_back({eps, e.p_hat, e.stderr_});
    const ExponentFit fit = exponent_fit(rows);
    rec.view = "exponent_fit";
    rec.table.columns = {"epsilon", "p_hat", "stderr", "ci_lo", "ci_hi", "method", "log_epsilon", "log_neg_log_p", "used"};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& [eps, e] : inputs) {
        const bool used = e.p_hat > 0.0 && e.p_hat < 1.0;
        rec.table.rows.push_back({eps, e.p_hat, e.stderr_, e.ci_lo, e.ci_hi, e.method, std::log(eps),
                                  used ? std::log(-std::log(e.p_hat)) : nan, I(used ? 1 : 0)});
    }
    rec.metadata["slope"] = fit.slope;
    rec.metadata["intercept"] = fit.intercept;
    rec.metadata["r2"] = fit.r2;
    rec.metadata["rows_used"] = static_cast<double>(fit.table.size());
    rec.warnings.insert(rec.warnings.end(), fit.warnings.begin(), fit.warnings.end());
}

void run_tail_curve(const ExperimentConfig& c, ResultRecord& rec) {
    require(c.n >= 100, "tail-curve needs n >= 100");
    TailBox box{c.epsilons.front(), c.theta, c.alpha, c.box_a};
    const TailStatistic stat = tail_statistic_from_string(c.tail_statistic);
    const TailCurve curve = tail_curve(stat, box, c.lambdas, c.ensemble());
    rec.view = "tail_curve";
    rec.table.columns = {"lambda", "lambda_sq", "p_hat", "ci_lo", "ci_hi", "n", "statistic"};
    for (const auto& r : curve.rows)
        rec.table.rows.push_back({r.lambda, r.lambda * r.lambda, r.p_hat, r.ci_lo, r.ci_hi, I(r.n), c.tail_statistic});
    rec.metadata["scale"] = curve.scale;
    rec.metadata["slope"] = curve.fit.slope;
    rec.metadata["intercept"] = curve.fit.intercept;
    rec.metadata["r2"] = curve.fit.r2;
    rec.metadata["points"] = static_cast<double>(curve.fit.points);
    if (curve.fit.points == 0) rec.warnings.push_back("fewer than 3 tail rows in the estimable range; no fit");
}

void run_localize(const ExperimentConfig& c, ResultRecord& rec) {
    const auto sigma = c.sigma_spec();
    const auto u0 = c.initial_profile();
    const std::vector<double> betas = c.betas.empty() ? std::vector<double>{c.beta} : c.betas;
    const std::size_t L = c.max_level;
    const std::size_t nx = c.grid.n_x;
    rec.view = "picard_decay";
    rec.table.columns = {"beta", "level", "error", "stderr", "argmax"};
    for (double beta : betas) {
        // per path: |V^l - V|^p on the final row, levels 0..L
        const auto diffs = parallel_map<std::vector<double>>(c.n, [&](std::size_t k) {
            const auto noise = sample_noise(c.grid, c.stream_offset + k, c.base_seed);
            const auto levels = picard_levels(c.grid, sigma, u0, beta, L, noise, c.enforce_window, c.kernel);
            LocalizationParams fp{beta, LocalizationParams::kFixedPoint, c.p, c.enforce_window};
            const auto limit = picard_path(c.grid, sigma, u0, fp, noise, c.kernel);
            std::vector<double> out((L + 1) * nx);
            const auto last = limit.values.row(c.grid.n_t);
            for (std::size_t l = 0; l <= L; ++l)
                for (std::size_t j = 0; j < nx; ++j)
                    out[l * nx + j] = std::pow(std::abs(levels[l].values(c.grid.n_t, j) - last[j]), c.p);
            return out;
        });
        const double nd = static_cast<double>(c.n);
        for (std::size_t l = 0; l <= L; ++l) {
            double best = -1.0, best_se = 0.0;
            std::size_t arg = 0;
            for (std::size_t j = 0; j < nx; ++j) {
                double s = 0.0, s2 = 0.0;
                for (const auto& d : diffs) {
                    s += d[l * nx + j];
                    s2 += d[l * nx + j] * d[l * nx + j];
                }
                const double mean = s / nd;
                if (mean > best) {
                    best = mean;
                    arg = j;
                    best_se = c.n > 1 ? std::sqrt(std::max(0.0, (s2 / nd - mean * mean) / (nd - 1.0))) : 0.0;
                }
            }
            rec.table.rows.push_back({beta, I(l), best, best_se, I(arg)});
        }
    }
}

double fitted_log_slope(const std::vector<double>& n, const std::vector<double>& v) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < n.size(); ++i)
        if (v[i] > 0.0) {
            x.push_back(std::log(n[i]));
            y.push_back(std::log(v[i]));
        }
    if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    return weighted_line(x, y, std::vector<double>(x.size(), 1.0)).slope;
}

void run_mollify(const ExperimentConfig& c, ResultRecord& rec) {
    const HolderFunction f = kink_profile(c.grid.n_t, c.grid.n_x, c.grid.T, c.holder_gamma, c.holder_beta);
    rec.table.columns = {"n", "sup_error", "max_dx", "max_dt", "max_dxx"};
    std::vector<double> ns, err, dx, dt, dxx;
    for (std::size_t level : c.levels) {
        const Array2D fn = mollify(f, level);
        double e = 0.0;
        for (std::size_t k = 0; k < fn.flat().size(); ++k) e = std::max(e, std::abs(fn.flat()[k] - f.values.flat()[k]));
        const DerivativeBounds b = derivative_bounds(fn, c.grid.T);
        rec.table.rows.push_back({I(level), e, b.dx, b.dt, b.dxx});
        ns.push_back(static_cast<double>(level));
        err.push_back(e);
        dx.push_back(b.dx);
        dt.push_back(b.dt);
        dxx.push_back(b.dxx);
    }
    rec.metadata["slope_sup_error"] = fitted_log_slope(ns, err);
    rec.metadata["slope_dx"] = fitted_log_slope(ns, dx);
    rec.metadata["slope_dt"] = fitted_log_slope(ns, dt);
    rec.metadata["slope_dxx"] = fitted_log_slope(ns, dxx);
    rec.metadata["min_gamma_beta"] = std::min(c.holder_gamma, c.holder_beta);
}

void run_verify_kernel(const ExperimentConfig& c, ResultRecord& rec) {
    const KernelConfig& k = c.kernel;
    rec.table.columns = {"check", "kind", "value", "reference", "abs_error", "tolerance", "pass"};
    // "info" rows are reported but do not decide the exit status
    auto add = [&](const std::string& name, double value, double ref, double tol, bool info = false) {
        const double err = std::abs(value - ref);
        const bool pass = err <= tol;
        if (!info) rec.ok = rec.ok && pass;
        rec.table.rows.push_back({name, std::string(info ? "info" : "check"), value, ref, err, tol, I(pass ? 1 : 0)});
    };
    // E|Z|^a by quadrature, with w = r^2
    auto abs_moment = [](double a) {
        return quad::adaptive_simpson([&](double r) { return 4.0 * std::pow(r, 1.0 + 2.0 * a) * gaussian_density(1.0, r * r); },
                                      0.0, 8.0, 1e-13, 50, 64);
    };
    add("lambda(1/2)", lambda_theta(0.5), 1.0, 0.0);
    for (int i = 1; i <= 9; ++i) {
        const double theta = 0.05 * i;
        const std::string tag = "(" + short_num(theta) + ")";
        const double defining = abs_moment(0.5 - theta);
        add("lambda closed form" + tag + " vs E|Z|^{1-2theta}", lambda_theta(theta), abs_moment(1.0 - 2.0 * theta), 1e-8);
        add("lambda_integral" + tag + " vs int p(1,w)|w|^{1/2-theta}", lambda_integral(theta), defining, 1e-8);
        add("lambda closed form" + tag + " vs int p(1,w)|w|^{1/2-theta}", lambda_theta(theta), defining, 1e-8, true);
    }
    for (double t : {1e-3, 1e-2, 0.1, 1.0}) {
        const double mass = quad::adaptive_simpson([&](double x) { return torus_kernel(t, x, k); }, 0.0, 1.0, 1e-12, 50, 64);
        add("mass G(" + short_num(t) + ")", mass, 1.0, 1e-8);
    }
    for (auto [s, t, x] : {std::array{0.01, 0.02, 0.3}, std::array{0.05, 0.1, 0.5}, std::array{0.2, 0.3, 0.9}}) {
        const double conv = quad::adaptive_simpson(
            [&](double y) { return torus_kernel(s, x - y, k) * torus_kernel(t, y, k); }, 0.0, 1.0, 1e-12, 50, 64);
        add("semigroup G(" + short_num(s) + ")*G(" + short_num(t) + ") at " + short_num(x), conv,
            torus_kernel(s + t, x, k), 1e-8);
    }
    add("time_window(0, 0.01)", increment_variance_quadrature(IncrementKind::time_window, 0.0, 0.01, k),
        std::sqrt(0.01 / std::numbers::pi), 1e-8);
}

void run_verify_covariance(const ExperimentConfig& c, ResultRecord& rec) {
    const auto scheme = IncrementScheme::make(c.epsilons.front(), c.theta, c.c0, c.c1);
    const auto sigma = c.sigma_spec();
    const auto report = covariance_report(scheme, sigma, c.kernel);
    rec.table.columns = {"j", "x", "variance", "conditional_variance", "ratio", "conditional_over_delta"};
    double min_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < scheme.J; ++j) {
        const double var = report.S(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
        const double cv = report.conditional_variances[j];
        min_ratio = std::min(min_ratio, cv / var);
        rec.table.rows.push_back({I(j), scheme.x(j), var, cv, cv / var, cv / scheme.delta});
    }
    rec.metadata["delta"] = scheme.delta;
    rec.metadata["t1"] = scheme.t1;
    rec.metadata["J"] = static_cast<double>(scheme.J);
    rec.metadata["norm_A"] = report.norm_A;
    rec.metadata["norm_S_inv"] = report.norm_S_inv;
    rec.metadata["neumann_bound"] = report.neumann_bound;
    rec.metadata["min_eigenvalue"] = report.min_eigenvalue;
    rec.metadata["min_ratio"] = min_ratio;
    rec.metadata["eta"] = eta_bound(scheme, report);
    rec.ok = !report.singular && min_ratio >= 0.5;
    if (!rec.ok) rec.warnings.push_back("conditional/unconditional variance ratio below 0.5 or singular covariance");
}

}  // namespace

ResultRecord run(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.threads > 0) set_thread_count(cfg.threads);
    ResultRecord rec;
    rec.config = cfg;
    const std::string canonical = config_to_json(cfg, -1);
    rec.config_digest = sha1_hex(canonical);
    // inputs: the canonical config plus the bytes of any input file it names
    rec.input_hash = git_blob_hash(cfg.input.empty() ? canonical : canonical + read_file(cfg.input));
    rec.created = utc_now();
    const std::string& s = cfg.subcommand;
    if (s == "simulate") run_simulate(cfg, rec);
    else if (s == "smallball") run_smallball(cfg, rec);
    else if (s == "exponent-fit") run_exponent_fit(cfg, rec);
    else if (s == "tail-curve") run_tail_curve(cfg, rec);
    else if (s == "localize") run_localize(cfg, rec);
    else if (s == "mollify") run_mollify(cfg, rec);
    else if (s == "verify-kernel") run_verify_kernel(cfg, rec);
    else run_verify_covariance(cfg, rec);
    return rec;
}

}  // namespace shelab
