#ifndef MSFV_VERSION_HPP
#define MSFV_VERSION_HPP

namespace msfv {

inline constexpr const char* version = "0.1.0";

} // namespace msfv

#endif // MSFV_VERSION_HPP
