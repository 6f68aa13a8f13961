#include "flexpipe/metrics/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "flexpipe/errors.hpp"

namespace flexpipe::metrics {

using nlohmann::json;

double percentile(std::vector<double> samples, double p) {
    if (samples.empty()) return 0.0;
    std::sort(samples.begin(), samples.end());
    const double rank = (p / 100.0) * static_cast<double>(samples.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(rank));
    const double frac = rank - static_cast<double>(lo);
    return samples[lo] * (1.0 - frac) + samples[hi] * frac;
}

StageStat make_stage(const std::string& label, std::vector<double> samples_ms) {
    StageStat s;
    s.stage = label;
    s.count = samples_ms.size();
    if (samples_ms.empty()) return s;
    double sum = 0;
    for (double v : samples_ms) sum += v;
    s.mean_ms = sum / static_cast<double>(samples_ms.size());
    s.p50_ms = percentile(samples_ms, 50.0);
    if (samples_ms.size() >= kP99MinSamples) s.p99_ms = percentile(samples_ms, 99.0);
    return s;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void csv_stage_row(std::ostream& os, const std::string& scenario, const StageStat& s) {
    os << scenario << ',' << s.stage << ',' << fmt(s.mean_ms) << ',' << fmt(s.p50_ms) << ','
       << (s.p99_ms ? fmt(*s.p99_ms) : "") << ',' << s.count << '\n';
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

void write_csv(const MetricsReport& r, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path);
    os << "scenario,stage,mean_ms,p50_ms,p99_ms,count\n";
    for (const auto& s : r.stages) csv_stage_row(os, r.scenario, s);
    csv_stage_row(os, r.scenario, r.end_to_end);
    os.flush();
    if (!os) throw Error("short write to " + path);
}

MetricsReport read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot read " + path);
    std::string line;
    if (!std::getline(is, line) || line != "scenario,stage,mean_ms,p50_ms,p99_ms,count")
        throw Error(path + ": not a report CSV (bad header)");
    MetricsReport r;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 6) throw Error(path + ": malformed row: " + line);
        StageStat s;
        r.scenario = f[0];
        s.stage = f[1];
        s.mean_ms = std::stod(f[2]);
        s.p50_ms = std::stod(f[3]);
        if (!f[4].empty()) s.p99_ms = std::stod(f[4]);
        s.count = static_cast<std::size_t>(std::stoull(f[5]));
        if (s.stage == "end_to_end")
            r.end_to_end = s;
        else
            r.stages.push_back(std::move(s));
    }
    return r;
}

namespace {

json stage_to_json(const StageStat& s) {
    json j{{"stage", s.stage},
           {"mean_ms", s.mean_ms},
           {"p50_ms", s.p50_ms},
           {"count", s.count}};
    if (s.p99_ms) j["p99_ms"] = *s.p99_ms;
    return j;
}

StageStat stage_from_json(const json& j) {
    StageStat s;
    s.stage = j.value("stage", "");
    s.mean_ms = j.value("mean_ms", 0.0);
    s.p50_ms = j.value("p50_ms", 0.0);
    if (j.contains("p99_ms")) s.p99_ms = j["p99_ms"].get<double>();
    s.count = j.value("count", std::size_t(0));
    return s;
}

} // namespace

std::string report_to_json_text(const MetricsReport& r) {
    json j{{"scenario", r.scenario},
           {"duration_s", r.duration_s},
           {"warmup_s", r.warmup_s},
           {"throughput", r.throughput},
           {"degenerate", r.degenerate},
           {"end_to_end", stage_to_json(r.end_to_end)},
           {"stages", json::array()},
           {"transport", json::array()},
           {"staleness", json::array()}};
    for (const auto& s : r.stages) j["stages"].push_back(stage_to_json(s));
    for (const auto& e : r.transport)
        j["transport"].push_back(
            {{"edge", e.edge}, {"sent", e.sent}, {"delivered", e.delivered}, {"dropped", e.dropped}});
    for (const auto& s : r.staleness)
        j["staleness"].push_back(
            {{"consumer", s.consumer}, {"mean_age_ms", s.mean_age_ms}, {"count", s.count}});
    return j.dump(2);
}

MetricsReport report_from_json_text(const std::string& text) {
    json j = json::parse(text);
    MetricsReport r;
    r.scenario = j.value("scenario", "");
    r.duration_s = j.value("duration_s", 0.0);
    r.warmup_s = j.value("warmup_s", 0.0);
    r.throughput = j.value("throughput", 0.0);
    r.degenerate = j.value("degenerate", false);
    if (j.contains("end_to_end")) r.end_to_end = stage_from_json(j["end_to_end"]);
    if (j.contains("stages"))
        for (const auto& s : j["stages"]) r.stages.push_back(stage_from_json(s));
    if (j.contains("transport"))
        for (const auto& e : j["transport"])
            r.transport.push_back({e.value("edge", ""), e.value("sent", std::uint64_t(0)),
                                   e.value("delivered", std::uint64_t(0)),
                                   e.value("dropped", std::uint64_t(0))});
    if (j.contains("staleness"))
        for (const auto& s : j["staleness"])
            r.staleness.push_back({s.value("consumer", ""), s.value("mean_age_ms", 0.0),
                                   s.value("count", std::uint64_t(0))});
    return r;
}

void write_json(const MetricsReport& r, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path);
    os << report_to_json_text(r) << "\n";
    os.flush();
    if (!os) throw Error("short write to " + path);
}

MetricsReport read_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot read " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    try {
        return report_from_json_text(ss.str());
    } catch (const json::exception& e) {
        throw Error(path + ": " + e.what());
    }
}

MetricsReport read_report(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") return read_csv(path);
    return read_json(path);
}

std::string compare_table(const std::vector<MetricsReport>& reports) {
    // Group by workload prefix ("workload/scenario").
    std::map<std::string, std::vector<const MetricsReport*>> groups;
    for (const auto& r : reports) {
        const auto slash = r.scenario.find('/');
        const std::string workload =
            slash == std::string::npos ? std::string("default") : r.scenario.substr(0, slash);
        groups[workload].push_back(&r);
    }

    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof(line), "%-28s %12s %12s %12s %10s  %s\n", "scenario",
                  "latency_ms", "p50_ms", "p99_ms", "msgs/s", "flags");
    os << line;
    for (const auto& [workload, rs] : groups) {
        const MetricsReport* best_lat = nullptr;
        const MetricsReport* best_thr = nullptr;
        for (const auto* r : rs) {
            if (r->degenerate) continue;
            if (!best_lat || r->end_to_end.mean_ms < best_lat->end_to_end.mean_ms) best_lat = r;
            if (!best_thr || r->throughput > best_thr->throughput) best_thr = r;
        }
        for (const auto* r : rs) {
            std::string flags;
            if (r == best_lat) flags += " best-latency";
            if (r == best_thr) flags += " best-throughput";
            if (r->degenerate) flags += " degenerate";
            std::snprintf(line, sizeof(line), "%-28s %12.3f %12.3f %12s %10.2f %s\n",
                          r->scenario.c_str(), r->end_to_end.mean_ms, r->end_to_end.p50_ms,
                          r->end_to_end.p99_ms ? fmt(*r->end_to_end.p99_ms).c_str() : "-",
                          r->throughput, flags.c_str());
            os << line;
        }
    }
    return os.str();
}

} // namespace flexpipe::metrics
