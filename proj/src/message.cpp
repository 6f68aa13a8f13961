#include "flexpipe/message.hpp"

#include <chrono>

namespace flexpipe {

std::int64_t now_ns() {
    using namespace std::chrono;
    struct Anchor {
        std::int64_t wall_ns;
        steady_clock::time_point steady;
    };
    static const Anchor anchor{
        duration_cast<nanoseconds>(system_clock::now().time_since_epoch()).count(),
        steady_clock::now()};
    return anchor.wall_ns +
           duration_cast<nanoseconds>(steady_clock::now() - anchor.steady).count();
}

} // namespace flexpipe
