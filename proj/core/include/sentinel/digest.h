#ifndef SENTINEL_DIGEST_H_
#define SENTINEL_DIGEST_H_

#include <string>
#include <string_view>

namespace sentinel {

// Lower-case hex SHA-256.
std::string Sha256Hex(std::string_view data);

}  // namespace sentinel

#endif  // SENTINEL_DIGEST_H_
