#pragma once

#include <optional>
#include <string>
#include <vector>

namespace flexpipe::metrics {

struct StageStat {
    std::string stage;
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    std::optional<double> p99_ms; // absent under 200 samples
    std::size_t count = 0;

    bool operator==(const StageStat&) const = default;
};

struct EdgeStat {
    std::string edge; // "<instance>.<port>" or "<instance>.<port>#<branch>"
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;

    bool operator==(const EdgeStat&) const = default;
};

struct StalenessStat {
    std::string consumer; // "<instance>.<port>"
    double mean_age_ms = 0.0;
    std::uint64_t count = 0;

    bool operator==(const StalenessStat&) const = default;
};

// Latency is how long the pipeline takes to reflect its source data at the
// sink; throughput is how often it does so per second. Stage rows follow hop
// order: each stage's latency spans from the previous hop's emission to this
// hop's, so stage means telescope to the end-to-end mean.
struct MetricsReport {
    std::string scenario;
    double duration_s = 0.0;
    double warmup_s = 0.0;
    std::vector<StageStat> stages;
    StageStat end_to_end; // stage label "end_to_end"
    double throughput = 0.0; // delivered sink messages per second
    bool degenerate = false; // zero sink messages observed
    std::vector<EdgeStat> transport;
    std::vector<StalenessStat> staleness;

    bool operator==(const MetricsReport&) const = default;
};

// percentile by rank over a copy of the samples; p in [0, 100]
double percentile(std::vector<double> samples, double p);
constexpr std::size_t kP99MinSamples = 200;

StageStat make_stage(const std::string& label, std::vector<double> samples_ms);

// CSV columns: scenario,stage,mean_ms,p50_ms,p99_ms,count — one row per stage
// plus a final end_to_end row. An absent p99 is an empty field.
void write_csv(const MetricsReport& r, const std::string& path);
MetricsReport read_csv(const std::string& path); // stages + end_to_end only

// JSON mirrors the MetricsReport fields exactly and round-trips.
void write_json(const MetricsReport& r, const std::string& path);
MetricsReport read_json(const std::string& path);
MetricsReport report_from_json_text(const std::string& text);
std::string report_to_json_text(const MetricsReport& r);

// Reads a report by extension (.json or .csv).
MetricsReport read_report(const std::string& path);

// Side-by-side scenario table. Reports group by the workload prefix of their
// scenario label ("workload/scenario"); the best latency and best throughput
// rows per workload are flagged.
std::string compare_table(const std::vector<MetricsReport>& reports);

} // namespace flexpipe::metrics
