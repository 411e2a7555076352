#include "mildlab/random.hpp"

namespace mildlab {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t stream_id(std::uint64_t base_seed, std::uint64_t sweep_index, std::uint64_t path_index) {
    std::uint64_t h = splitmix64(base_seed);
    h = splitmix64(h ^ sweep_index);
    return splitmix64(h ^ (path_index + 0x632be59bd9b4e019ULL));
}

std::uint64_t substream(std::uint64_t stream, std::uint64_t tag) {
    return splitmix64(stream ^ splitmix64(tag));
}

}  // namespace mildlab
