#include "umae/error.hpp"

#include <utility>

namespace umae {

Error::Error(std::string module, const std::string& what)
    : std::runtime_error(module + ": " + what), module_(std::move(module)) {}

}  // namespace umae
