#ifndef NMFRANK_VERSION_HPP
#define NMFRANK_VERSION_HPP

namespace nmfrank {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace nmfrank

#endif  // NMFRANK_VERSION_HPP
