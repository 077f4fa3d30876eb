#include "wlcg/storage.hpp"

namespace wlcg {

void StorageTree::put(const std::string& path, std::string bytes) {
    std::lock_guard lock(m_);
    objects_[path] = std::move(bytes);
}

std::optional<std::string> StorageTree::get(const std::string& path) const {
    std::lock_guard lock(m_);
    auto it = objects_.find(path);
    if (it == objects_.end())
        return std::nullopt;
    return it->second;
}

bool StorageTree::exists(const std::string& path) const {
    std::lock_guard lock(m_);
    return objects_.count(path) > 0 || collections_.count(path) > 0;
}

bool StorageTree::make_collection(const std::string& path) {
    std::lock_guard lock(m_);
    if (objects_.count(path))
        return false;
    return collections_.insert(path).second || path == "/";
}

bool StorageTree::is_collection(const std::string& path) const {
    std::lock_guard lock(m_);
    return collections_.count(path) > 0;
}

std::vector<std::string> StorageTree::list(const std::string& path) const {
    std::lock_guard lock(m_);
    std::string prefix = path == "/" ? "/" : path + "/";
    std::vector<std::string> out;
    auto collect = [&](const std::string& candidate) {
        if (candidate.size() <= prefix.size() || candidate.compare(0, prefix.size(), prefix) != 0)
            return;
        if (candidate.find('/', prefix.size()) != std::string::npos)
            return; // deeper than one level
        out.push_back(candidate);
    };
    for (const auto& [p, bytes] : objects_)
        collect(p);
    for (const auto& c : collections_)
        collect(c);
    return out;
}

} // namespace wlcg
