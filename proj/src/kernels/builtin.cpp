#include "flexpipe/kernels/builtin.hpp"

#include <cmath>

#include "flexpipe/errors.hpp"

namespace flexpipe::kernels {

namespace {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Models compute cost. Sleeping is the default; busy spins for contention
// experiments.
void work(Kernel& k, double compute_ms, bool busy) {
    if (compute_ms <= 0) return;
    if (busy) {
        const auto until = std::chrono::steady_clock::now() +
                           std::chrono::nanoseconds(static_cast<std::int64_t>(compute_ms * 1e6));
        while (std::chrono::steady_clock::now() < until && !k.stop_requested()) {
        }
    } else {
        k.sleep_for(std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(compute_ms))));
    }
}

std::size_t checked_size(std::int64_t v, const char* what) {
    if (v < 0) throw ConfigError(std::string(what) + " must be >= 0");
    if (static_cast<std::size_t>(v) > kMaxPayloadBytes)
        throw ConfigError(std::string(what) + " exceeds the 64 MiB payload cap");
    return static_cast<std::size_t>(v);
}

} // namespace

Bytes pseudo_payload(std::uint64_t seed, std::uint64_t seq, std::size_t len) {
    Bytes out(len);
    const std::uint64_t base = mix64(seed ^ mix64(seq));
    std::size_t i = 0;
    while (i < len) {
        std::uint64_t block = mix64(base + i / 8);
        for (int b = 0; b < 8 && i < len; ++b, ++i)
            out[i] = static_cast<std::uint8_t>((block >> (8 * b)) & 0xff);
    }
    return out;
}

std::uint64_t content_hash(std::span<const std::uint8_t> bytes) {
    // FNV-1a over length plus a 64-byte prefix; enough to key derived content.
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    mix(bytes.size());
    for (std::size_t i = 0; i < bytes.size() && i < 64; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ull;
    }
    return h;
}

void put_u64le(Bytes& buf, std::size_t offset, std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
        buf[offset + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xff);
}

std::uint64_t read_u64le(std::span<const std::uint8_t> buf, std::size_t offset) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(buf[offset + static_cast<std::size_t>(i)]) << (8 * i);
    return v;
}

// --- FrameSource -------------------------------------------------------------

FrameSource::FrameSource(const KernelParams& p) : Kernel("FrameSource") {
    require_known_params(p, {"hz", "payload_bytes", "seed", "frames", "type_tag"}, type());
    hz_ = param_double(p, "hz", 30.0);
    if (!(hz_ > 0.0)) throw ConfigError("FrameSource: hz must be > 0");
    payload_bytes_ = checked_size(param_int(p, "payload_bytes", 1024), "payload_bytes");
    seed_ = static_cast<std::uint64_t>(param_int(p, "seed", 1));
    frames_ = static_cast<std::uint64_t>(param_int(p, "frames", 0));
    type_tag_ = param_string(p, "type_tag", "frame");
    ports().register_out_port("out");
    set_frequency(hz_);
}

StepStatus FrameSource::step() {
    if (frames_ > 0 && emitted_ >= frames_) return StepStatus::stop;
    Message m = ports().get_output_placeholder("out");
    m.type_tag = type_tag_;
    m.set_payload(pseudo_payload(seed_, m.seq, payload_bytes_));
    ports().send_output("out", std::move(m));
    ++emitted_;
    return StepStatus::proceed;
}

// --- EventSource -------------------------------------------------------------

EventSource::EventSource(const KernelParams& p) : Kernel("EventSource") {
    require_known_params(p, {"mean_interval_ms", "seed", "payload_bytes", "events"}, type());
    mean_interval_ms_ = param_double(p, "mean_interval_ms", 1000.0);
    if (!(mean_interval_ms_ > 0.0)) throw ConfigError("EventSource: mean_interval_ms must be > 0");
    payload_bytes_ = checked_size(param_int(p, "payload_bytes", 16), "payload_bytes");
    events_ = static_cast<std::uint64_t>(param_int(p, "events", 0));
    rng_.seed(static_cast<std::uint64_t>(param_int(p, "seed", 1)));
    ports().register_out_port("out");
}

StepStatus EventSource::step() {
    if (events_ > 0 && emitted_ >= events_) return StepStatus::stop;
    std::exponential_distribution<double> d(1.0 / mean_interval_ms_);
    const double wait_ms = d(rng_);
    if (!sleep_for(std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(wait_ms)))))
        return StepStatus::stop;
    Message m = ports().get_output_placeholder("out");
    m.type_tag = "event";
    m.set_payload(pseudo_payload(0xEE, m.seq, payload_bytes_));
    ports().send_output("out", std::move(m));
    ++emitted_;
    return StepStatus::proceed;
}

// --- DetectorStub ------------------------------------------------------------

DetectorStub::DetectorStub(const KernelParams& p) : Kernel("DetectorStub") {
    require_known_params(p, {"compute_ms", "result_bytes", "busy"}, type());
    compute_ms_ = param_double(p, "compute_ms", 10.0);
    if (compute_ms_ < 0) throw ConfigError("DetectorStub: compute_ms must be >= 0");
    result_bytes_ = checked_size(param_int(p, "result_bytes", 128), "result_bytes");
    if (result_bytes_ < 8) throw ConfigError("DetectorStub: result_bytes must be >= 8");
    busy_ = param_bool(p, "busy", false);
    ports().register_in_port("in", PortSemantics::blocking);
    ports().register_out_port("out");
}

StepStatus DetectorStub::step() {
    auto in = ports().get_input("in");
    if (!in) return in.end_of_stream ? StepStatus::stop : StepStatus::proceed;
    work(*this, compute_ms_, busy_);
    Message out = ports().get_output_placeholder("out");
    out.inherit_timing(*in.message);
    out.type_tag = "detection";
    Bytes payload = pseudo_payload(content_hash(in.message->payload()), in.message->seq,
                                   result_bytes_);
    put_u64le(payload, 0, in.message->seq);
    out.set_payload(std::move(payload));
    ports().send_output("out", std::move(out));
    return StepStatus::proceed;
}

// --- RendererStub ------------------------------------------------------------

RendererStub::RendererStub(const KernelParams& p) : Kernel("RendererStub") {
    require_known_params(p, {"compute_ms", "output_bytes", "busy"}, type());
    compute_ms_ = param_double(p, "compute_ms", 5.0);
    if (compute_ms_ < 0) throw ConfigError("RendererStub: compute_ms must be >= 0");
    output_bytes_ = checked_size(param_int(p, "output_bytes", 1024), "output_bytes");
    if (output_bytes_ < 24) throw ConfigError("RendererStub: output_bytes must be >= 24");
    busy_ = param_bool(p, "busy", false);
    ports().register_in_port("bg", PortSemantics::blocking);
    ports().register_in_port("det", PortSemantics::non_blocking);
    ports().register_in_port("key", PortSemantics::non_blocking);
    ports().register_out_port("out");
}

StepStatus RendererStub::step() {
    auto bg = ports().get_input("bg");
    if (!bg) return bg.end_of_stream ? StepStatus::stop : StepStatus::proceed;

    // Latest wins for the optional inputs; stale entries are drained.
    std::uint64_t det_seq = kNoSeq;
    while (auto det = ports().get_input("det")) det_seq = det.message->seq;
    std::uint64_t key_seq = kNoSeq;
    while (auto key = ports().get_input("key")) key_seq = key.message->seq;

    work(*this, compute_ms_, busy_);

    Message out = ports().get_output_placeholder("out");
    out.inherit_timing(*bg.message);
    out.type_tag = "rendered";
    Bytes payload = pseudo_payload(content_hash(bg.message->payload()), bg.message->seq,
                                   output_bytes_);
    put_u64le(payload, 0, bg.message->seq);
    put_u64le(payload, 8, det_seq);
    put_u64le(payload, 16, key_seq);
    out.set_payload(std::move(payload));
    ports().send_output("out", std::move(out));
    return StepStatus::proceed;
}

// --- CodecStub ---------------------------------------------------------------

CodecStub::CodecStub(const KernelParams& p) : Kernel("CodecStub") {
    require_known_params(p, {"mode", "compute_ms", "ratio", "busy"}, type());
    const std::string mode = param_string(p, "mode", "encode");
    if (mode != "encode" && mode != "decode")
        throw ConfigError("CodecStub: mode must be 'encode' or 'decode'");
    encode_ = mode == "encode";
    compute_ms_ = param_double(p, "compute_ms", 0.0);
    if (compute_ms_ < 0) throw ConfigError("CodecStub: compute_ms must be >= 0");
    ratio_ = param_double(p, "ratio", encode_ ? 0.1 : 10.0);
    if (encode_ && !(ratio_ > 0.0 && ratio_ <= 1.0))
        throw ConfigError("CodecStub: encode ratio must be in (0, 1]");
    if (!encode_ && !(ratio_ >= 1.0)) throw ConfigError("CodecStub: decode ratio must be >= 1");
    busy_ = param_bool(p, "busy", false);
    ports().register_in_port("in", PortSemantics::blocking);
    ports().register_out_port("out");
}

StepStatus CodecStub::step() {
    auto in = ports().get_input("in");
    if (!in) return in.end_of_stream ? StepStatus::stop : StepStatus::proceed;
    work(*this, compute_ms_, busy_);

    const auto src = in.message->payload();
    const std::size_t out_len = static_cast<std::size_t>(
        std::llround(static_cast<double>(src.size()) * ratio_));
    Bytes payload(out_len);
    for (std::size_t i = 0; i < out_len; ++i)
        payload[i] = src.empty() ? 0 : src[i % src.size()];

    Message out = ports().get_output_placeholder("out");
    out.inherit_timing(*in.message);
    out.type_tag = in.message->type_tag;
    out.set_payload(std::move(payload));
    ports().send_output("out", std::move(out));
    return StepStatus::proceed;
}

// --- Sink ----------------------------------------------------------------------

Sink::Sink(const KernelParams& p) : Kernel("Sink") {
    require_known_params(p, {"log_every"}, type());
    log_every_ = static_cast<std::uint64_t>(param_int(p, "log_every", 0));
    ports().register_in_port("in", PortSemantics::blocking);
}

StepStatus Sink::step() {
    auto in = ports().get_input("in");
    if (!in) return in.end_of_stream ? StepStatus::stop : StepStatus::proceed;
    SinkRecord rec;
    rec.seq = in.message->seq;
    rec.ts_origin = in.message->ts_origin;
    rec.ts_record = now_ns();
    rec.payload_len = in.message->payload_size();
    rec.hops = in.message->hops;
    rec.hops.push_back({id(), rec.ts_record});
    std::size_t n;
    {
        std::lock_guard lk(mutex_);
        records_.push_back(std::move(rec));
        n = records_.size();
    }
    if (log_every_ > 0 && n % log_every_ == 0)
        log(LogLevel::info, "received " + std::to_string(n) + " messages");
    return StepStatus::proceed;
}

std::vector<SinkRecord> Sink::records() const {
    std::lock_guard lk(mutex_);
    return records_;
}

std::size_t Sink::count() const {
    std::lock_guard lk(mutex_);
    return records_.size();
}

// --- PoseEstimatorStub ---------------------------------------------------------

PoseEstimatorStub::PoseEstimatorStub(const KernelParams& p) : Kernel("PoseEstimatorStub") {
    require_known_params(p, {"compute_ms", "pose_bytes", "busy"}, type());
    compute_ms_ = param_double(p, "compute_ms", 5.0);
    if (compute_ms_ < 0) throw ConfigError("PoseEstimatorStub: compute_ms must be >= 0");
    pose_bytes_ = checked_size(param_int(p, "pose_bytes", 64), "pose_bytes");
    if (pose_bytes_ < 16) throw ConfigError("PoseEstimatorStub: pose_bytes must be >= 16");
    busy_ = param_bool(p, "busy", false);
    ports().register_in_port("imu", PortSemantics::blocking);
    ports().register_in_port("cam", PortSemantics::non_blocking);
    ports().register_out_port("out");
}

StepStatus PoseEstimatorStub::step() {
    auto imu = ports().get_input("imu");
    if (!imu) return imu.end_of_stream ? StepStatus::stop : StepStatus::proceed;
    std::uint64_t cam_seq = kNoSeq;
    while (auto cam = ports().get_input("cam")) cam_seq = cam.message->seq;
    work(*this, compute_ms_, busy_);

    Message out = ports().get_output_placeholder("out");
    out.inherit_timing(*imu.message);
    out.type_tag = "pose";
    Bytes payload = pseudo_payload(content_hash(imu.message->payload()), imu.message->seq,
                                   pose_bytes_);
    put_u64le(payload, 0, imu.message->seq);
    put_u64le(payload, 8, cam_seq);
    out.set_payload(std::move(payload));
    ports().send_output("out", std::move(out));
    return StepStatus::proceed;
}

// --- ExampleKernel ---------------------------------------------------------------

ExampleKernel::ExampleKernel(const KernelParams& p) : Kernel("ExampleKernel") {
    require_known_params(p, {}, type());
    ports().register_in_port("in1", PortSemantics::blocking);
    ports().register_in_port("in2", PortSemantics::non_blocking);
    ports().register_out_port("out");
}

StepStatus ExampleKernel::step() {
    auto in1 = ports().get_input("in1");
    if (!in1) return in1.end_of_stream ? StepStatus::stop : StepStatus::proceed;
    auto in2 = ports().get_input("in2"); // optional; absent when nothing queued
    (void)in2;

    Message out = ports().get_output_placeholder("out");
    out.inherit_timing(*in1.message);
    out.type_tag = in1.message->type_tag;
    out.share_payload(*in1.message); // local forwarding copies no bytes
    ports().send_output("out", std::move(out));
    return StepStatus::proceed;
}

KernelRegistry default_registry() {
    KernelRegistry r;
    r.add<FrameSource>("FrameSource");
    r.add<EventSource>("EventSource");
    r.add<DetectorStub>("DetectorStub");
    r.add<RendererStub>("RendererStub");
    r.add<CodecStub>("CodecStub");
    r.add<Sink>("Sink");
    r.add<PoseEstimatorStub>("PoseEstimatorStub");
    r.add<ExampleKernel>("ExampleKernel");
    return r;
}

} // namespace flexpipe::kernels
