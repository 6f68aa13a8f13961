#pragma once

#include "flexpipe/deploy/client.hpp"
#include "flexpipe/kernels/builtin.hpp"
#include "flexpipe/metrics/report.hpp"

namespace flexpipe::metrics {

struct BenchOptions {
    double duration_s = 10.0;
    double warmup_s = 1.0;
    std::string label; // scenario label; defaults to "recipe"
    deploy::ServerMap servers;
    deploy::DeployOptions deploy;
};

// Deploys the recipe (locally, or distributed when placements name remote
// hosts), runs warmup + duration, tears down, and aggregates sink records
// into a report. Warmup records are discarded.
MetricsReport bench(const recipe::PipelineRecipe& r, const KernelRegistry& registry,
                    const BenchOptions& opts);

// Aggregation on its own, for tests: builds the report from sink records
// collected between cutoff_ns and end_ns.
MetricsReport aggregate_records(const std::vector<kernels::SinkRecord>& records,
                                std::int64_t cutoff_ns, std::int64_t end_ns,
                                const std::string& scenario, double duration_s, double warmup_s);

} // namespace flexpipe::metrics
