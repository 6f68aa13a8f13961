#pragma once

#include <mutex>
#include <random>

#include "flexpipe/registry.hpp"

namespace flexpipe::kernels {

// Deterministic payload generator: bytes are a pure function of (seed, seq).
Bytes pseudo_payload(std::uint64_t seed, std::uint64_t seq, std::size_t len);
std::uint64_t content_hash(std::span<const std::uint8_t> bytes);

// Payload header helpers; built-in kernels prefix their outputs with the
// sequence numbers of the inputs they consumed.
void put_u64le(Bytes& buf, std::size_t offset, std::uint64_t v);
std::uint64_t read_u64le(std::span<const std::uint8_t> buf, std::size_t offset);
inline constexpr std::uint64_t kNoSeq = ~0ull;

// Emits seed-derived frames of payload_bytes at hz.
// params: hz, payload_bytes, seed, frames (0 = unbounded), type_tag
class FrameSource : public Kernel {
public:
    explicit FrameSource(const KernelParams& p);
    StepStatus step() override;

private:
    double hz_;
    std::size_t payload_bytes_;
    std::uint64_t seed_;
    std::uint64_t frames_;
    std::uint64_t emitted_ = 0;
    std::string type_tag_;
};

// Sporadic events with exponential inter-arrival around mean_interval_ms.
// params: mean_interval_ms, seed, payload_bytes, events (0 = unbounded)
class EventSource : public Kernel {
public:
    explicit EventSource(const KernelParams& p);
    StepStatus step() override;

private:
    double mean_interval_ms_;
    std::size_t payload_bytes_;
    std::uint64_t events_;
    std::uint64_t emitted_ = 0;
    std::mt19937_64 rng_;
};

// Models perception: consumes a frame, works compute_ms, emits a small result
// carrying the input's seq (payload header) and its origin timestamp.
// params: compute_ms, result_bytes, busy
class DetectorStub : public Kernel {
public:
    explicit DetectorStub(const KernelParams& p);
    StepStatus step() override;

private:
    double compute_ms_;
    std::size_t result_bytes_;
    bool busy_;
};

// Consumes one background frame per step (hard dependency), incorporates the
// latest detection/key event when present (soft dependencies), emits a frame.
// Output header: [bg_seq][det_seq|none][key_seq|none].
// params: compute_ms, output_bytes, busy
class RendererStub : public Kernel {
public:
    explicit RendererStub(const KernelParams& p);
    StepStatus step() override;

private:
    double compute_ms_;
    std::size_t output_bytes_;
    bool busy_;
};

// Size-scaling stage standing in for (de)compression: output length is
// round(input length * ratio); content derives deterministically from input.
// params: mode (encode|decode), compute_ms, ratio
class CodecStub : public Kernel {
public:
    explicit CodecStub(const KernelParams& p);
    StepStatus step() override;

private:
    bool encode_;
    double compute_ms_;
    double ratio_;
    bool busy_;
};

// Terminal stage: records (seq, ts_origin, arrival, payload_len, hops) for
// the metrics collector.
// params: log_every
struct SinkRecord {
    std::uint64_t seq = 0;
    std::int64_t ts_origin = 0;
    std::int64_t ts_record = 0;
    std::size_t payload_len = 0;
    std::vector<Hop> hops; // message hops plus this sink's own
};

class Sink : public Kernel {
public:
    explicit Sink(const KernelParams& p);
    StepStatus step() override;

    std::vector<SinkRecord> records() const;
    std::size_t count() const;

private:
    std::uint64_t log_every_;
    mutable std::mutex mutex_;
    std::vector<SinkRecord> records_;
};

// IMU-driven pose estimation: hard dependency on the inertial stream, the
// camera input is optional. Output header: [imu_seq][cam_seq|none].
// params: compute_ms, pose_bytes, busy
class PoseEstimatorStub : public Kernel {
public:
    explicit PoseEstimatorStub(const KernelParams& p);
    StepStatus step() override;

private:
    double compute_ms_;
    std::size_t pose_bytes_;
    bool busy_;
};

// The kernel-author template: one hard input, one optional input, one output.
// Forwards in1 payloads without copying bytes.
class ExampleKernel : public Kernel {
public:
    explicit ExampleKernel(const KernelParams& p);
    StepStatus step() override;
};

// All built-in kernel types.
KernelRegistry default_registry();

} // namespace flexpipe::kernels
