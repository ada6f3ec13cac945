#ifndef CONCEPTREE_HASH_H_
#define CONCEPTREE_HASH_H_

#include <string>
#include <string_view>

namespace conceptree {

// Lowercase hex SHA-256 digest.
std::string Sha256Hex(std::string_view bytes);

}  // namespace conceptree

#endif  // CONCEPTREE_HASH_H_
