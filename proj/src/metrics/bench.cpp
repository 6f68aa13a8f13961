#include "flexpipe/metrics/bench.hpp"

#include <map>
#include <thread>

#include "flexpipe/log.hpp"

namespace flexpipe::metrics {

using kernels::Sink;
using kernels::SinkRecord;

MetricsReport aggregate_records(const std::vector<SinkRecord>& all_records,
                                std::int64_t cutoff_ns, std::int64_t end_ns,
                                const std::string& scenario, double duration_s, double warmup_s) {
    MetricsReport report;
    report.scenario = scenario;
    report.duration_s = duration_s;
    report.warmup_s = warmup_s;

    std::vector<const SinkRecord*> records;
    for (const auto& rec : all_records)
        if (rec.ts_record >= cutoff_ns && rec.ts_record < end_ns) records.push_back(&rec);

    report.degenerate = records.empty();
    report.throughput = duration_s > 0
                            ? static_cast<double>(records.size()) / duration_s
                            : 0.0;

    std::vector<double> e2e;
    e2e.reserve(records.size());
    for (const auto* rec : records)
        e2e.push_back(static_cast<double>(rec->ts_record - rec->ts_origin) / 1e6);
    report.end_to_end = make_stage("end_to_end", std::move(e2e));

    if (records.empty()) return report;

    // Stage breakdown follows the hop chain. Records group by their label
    // sequence; the dominant sequence forms the rows. Stage k spans from hop
    // k-1 to hop k (the first stage from ts_origin), so the stage means sum
    // to the end-to-end mean of that group.
    std::map<std::string, std::vector<const SinkRecord*>> groups;
    for (const auto* rec : records) {
        std::string key;
        for (const auto& h : rec->hops) {
            key += h.stage;
            key += '\n';
        }
        groups[key].push_back(rec);
    }
    const std::vector<const SinkRecord*>* dominant = nullptr;
    for (const auto& [key, group] : groups)
        if (!dominant || group.size() > dominant->size()) dominant = &group;

    if (dominant && !dominant->empty()) {
        const auto& chain = (*dominant)[0]->hops;
        for (std::size_t k = 0; k < chain.size(); ++k) {
            std::vector<double> deltas;
            deltas.reserve(dominant->size());
            for (const auto* rec : *dominant) {
                const std::int64_t prev = k == 0 ? rec->ts_origin : rec->hops[k - 1].ts_ns;
                deltas.push_back(static_cast<double>(rec->hops[k].ts_ns - prev) / 1e6);
            }
            report.stages.push_back(make_stage(chain[k].stage, std::move(deltas)));
        }
    }
    return report;
}

MetricsReport bench(const recipe::PipelineRecipe& r, const KernelRegistry& registry,
                    const BenchOptions& opts) {
    if (!(opts.duration_s > 0)) throw ConfigError("bench duration must be > 0");
    if (opts.warmup_s < 0) throw ConfigError("bench warmup must be >= 0");
    if (opts.duration_s < opts.warmup_s)
        throw ConfigError("bench duration must be >= warmup");

    (void)recipe::validate(r, registry);

    bool needs_remote = false;
    for (const auto& [id, host] : r.placements)
        if (host != recipe::kLocalHost) needs_remote = true;

    std::unique_ptr<deploy::Pipeline> local;
    std::unique_ptr<deploy::DistributedPipeline> distributed;
    deploy::Pipeline* pipeline = nullptr;

    if (needs_remote) {
        distributed = deploy::DistributedPipeline::deploy(r, registry, opts.servers, opts.deploy);
        pipeline = &distributed->local();
    } else {
        auto meta = recipe::validate(r, registry);
        local = deploy::Pipeline::instantiate(meta, registry, opts.deploy);
        if (local->aggregate() == deploy::AggregateState::failed) {
            std::string causes;
            for (const auto& id : local->instance_ids())
                if (!local->failure(id).empty()) causes += "\n  " + id + ": " + local->failure(id);
            throw ConfigError("bench deployment failed:" + causes);
        }
        local->start();
        pipeline = local.get();
    }

    const std::int64_t t0 = now_ns();
    const std::int64_t cutoff = t0 + static_cast<std::int64_t>(opts.warmup_s * 1e9);
    const std::int64_t end = cutoff + static_cast<std::int64_t>(opts.duration_s * 1e9);
    while (now_ns() < end) {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        if (pipeline->wait_done(std::chrono::milliseconds(0))) break; // sources completed
    }
    const std::int64_t actual_end = std::min(now_ns(), end);

    // Freeze records before teardown.
    std::vector<SinkRecord> records;
    std::vector<std::pair<std::string, Kernel*>> kernels_by_id;
    for (const auto& id : pipeline->instance_ids())
        kernels_by_id.emplace_back(id, pipeline->kernel(id));
    for (const auto& [id, k] : kernels_by_id) {
        if (auto* sink = dynamic_cast<Sink*>(k)) {
            auto recs = sink->records();
            records.insert(records.end(), recs.begin(), recs.end());
        }
    }

    const double measured_s =
        std::max(1e-9, static_cast<double>(actual_end - cutoff) / 1e9);
    MetricsReport report =
        aggregate_records(records, cutoff, end,
                          opts.label.empty() ? std::string("recipe") : opts.label, measured_s,
                          opts.warmup_s);

    // Per-edge transport counters and consumer staleness from port stats.
    for (const auto& [id, k] : kernels_by_id) {
        for (const auto& port : k->ports().outputs()) {
            const auto s = port->stats();
            if (s.sent || s.delivered || s.dropped)
                report.transport.push_back({id + "." + port->tag(), s.sent, s.delivered, s.dropped});
            for (const auto& b : port->branches()) {
                const auto bs = b->stats();
                if (bs.sent || bs.delivered || bs.dropped)
                    report.transport.push_back(
                        {id + "." + port->tag() + "#" + b->tag(), bs.sent, bs.delivered,
                         bs.dropped});
            }
        }
        for (const auto& port : k->ports().inputs()) {
            const auto s = port->stats();
            if (s.received)
                report.staleness.push_back(
                    {id + "." + port->tag(),
                     s.age_sum_ms / static_cast<double>(s.received), s.received});
        }
    }

    if (distributed)
        distributed->stop();
    else
        local->stop();
    return report;
}

} // namespace flexpipe::metrics
