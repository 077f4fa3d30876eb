#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace wlcg {

/// Path-structured in-memory object tree backing the demo storage API.
/// Mutations are atomic per path, last writer wins.
class StorageTree {
  public:
    void put(const std::string& path, std::string bytes);
    std::optional<std::string> get(const std::string& path) const;
    bool exists(const std::string& path) const;

    /// MKCOL-style collection creation; returns false when something
    /// already exists at the path.
    bool make_collection(const std::string& path);
    bool is_collection(const std::string& path) const;

    /// Immediate children of a collection path.
    std::vector<std::string> list(const std::string& path) const;

  private:
    mutable std::mutex m_;
    std::map<std::string, std::string> objects_;
    std::set<std::string> collections_{"/"};
};

} // namespace wlcg
