#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "shelab/grid_noise.hpp"
#include "shelab/heat_kernel.hpp"
#include "shelab/holder.hpp"
#include "shelab/smallball.hpp"

namespace shelab {

inline constexpr int kSchemaVersion = 1;

/// Validation failure carrying the names of every offending field.
class ConfigError : public DomainError {
public:
    ConfigError(const std::string& what, std::vector<std::string> fields)
        : DomainError(what), fields_(std::move(fields)) {}
    const std::vector<std::string>& fields() const { return fields_; }

private:
    std::vector<std::string> fields_;
};

struct Preset {
    std::string name;
    std::vector<double> params;
    friend bool operator==(const Preset&, const Preset&) = default;
};

struct ExperimentConfig {
    std::string subcommand = "verify-kernel";
    Grid grid{64, 64, 0.01};
    Preset sigma{"const", {1.0}};
    Preset u0{"zero", {}};

    // event
    std::string event = "spatial_sup";
    double theta = 0.45;
    std::vector<double> epsilons{0.5};
    std::string metric = "representative";
    std::size_t stride = 1;
    std::size_t point = 0;
    std::string family = "spatial";
    std::size_t block_steps = 0;
    double c_block = 1.0;

    std::string method = "plain";  // plain | splitting | importance
    std::string solver = "fd";     // fd | spectral
    std::size_t n = 1000;
    std::size_t m = 2000;
    std::size_t R = 20;
    std::uint64_t base_seed = 1;
    std::uint64_t stream_offset = 0;
    bool enforce_hypotheses = true;
    std::size_t threads = 0;  // 0: SHELAB_THREADS or 1
    std::string out;
    std::string format = "csv";  // simulate: csv | binary

    double t1 = 0.0;  // importance tilt horizon

    std::string input;  // exponent-fit: smallball CSV to fit instead of rerunning the sweep

    // localize
    double beta = 1.0;
    std::vector<double> betas;
    std::size_t max_level = 6;
    double p = 2.0;
    bool enforce_window = true;

    // tail-curve
    std::string tail_statistic = "sup_N";
    double alpha = 1.0;
    double box_a = 0.0;
    std::vector<double> lambdas{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};

    // mollify
    double holder_gamma = 0.5;
    double holder_beta = 0.5;
    std::vector<std::size_t> levels{4, 8, 16, 32};

    // verify-covariance
    double c0 = 1.0;
    double c1 = 16.0;

    KernelConfig kernel;

    /// Throws ConfigError listing every offending field.
    void validate() const;

    SigmaSpec sigma_spec() const;
    std::vector<double> initial_profile() const;
    EventSpec event_spec(double epsilon) const;
    EnsembleConfig ensemble() const;
};

using Cell = std::variant<double, std::int64_t, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    std::size_t column_index(const std::string& name) const;  // npos when absent
};

struct ResultRecord {
    int schema_version = kSchemaVersion;
    ExperimentConfig config;
    std::string config_digest;  // SHA-1 of the canonical config JSON
    std::string input_hash;     // git blob hash of the canonical config JSON
    std::string created;        // UTC timestamp, not part of any CSV
    std::string view;           // default plot view, may be empty
    Table table;
    std::map<std::string, double> metadata;
    std::vector<std::string> warnings;
    bool ok = true;  // verify-* commands: every check passed
};

std::string config_to_json(const ExperimentConfig& cfg, int indent = 2);
/// Missing keys keep their defaults; unknown keys and a wrong schema_version are errors.
ExperimentConfig config_from_json(const std::string& text);

std::string sha1_hex(const std::string& bytes);
std::string git_blob_hash(const std::string& bytes);

/// Dispatch on cfg.subcommand.
ResultRecord run(const ExperimentConfig& cfg);

/// %.17g doubles, RFC-4180 quoting, CRLF-free LF line ends.
std::string format_cell(const Cell& c);
void write_csv(std::ostream& os, const Table& table);
/// RFC-4180 reader; every cell comes back as a string.
Table read_csv(std::istream& is);

enum class PlotView { smallball_curve, exponent_fit, tail_curve, picard_decay };
PlotView plot_view_from_string(const std::string& s);
std::vector<std::string> view_columns(PlotView view);

/// Selects the view's columns from the record table. An empty record gives a
/// header-only table; a record lacking a column is an error.
Table emit_plot_data(const ResultRecord& record, PlotView view);

/// Sidecar metadata of the exponent_fit view.
std::string fit_sidecar_json(const ResultRecord& record);

std::string record_to_json(const ResultRecord& record);

/// Machine-readable error object.
std::string error_json(const std::string& type, const std::string& message,
                       const std::vector<std::string>& fields = {});

/// Writes <out>.csv, <out>.json and view sidecars. Returns the written paths.
std::vector<std::string> persist(const ResultRecord& record, const std::string& out);

}  // namespace shelab
