#include "ftlab/rng.hpp"

#include <sstream>

#include "ftlab/errors.hpp"

namespace ftlab {

std::string Rng::serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void Rng::deserialize(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
    if (is.fail()) {
        throw DomainError("rng state parse failure");
    }
}

}  // namespace ftlab
