#pragma once

#include <string>
#include <unordered_map>

#include "xsim/dataset.hpp"
#include "xsim/preprocess.hpp"

namespace xsim {

// Decode-once cache keyed by file path (not record id: the same id can point
// at original and cropped files in the comparison flow).
class ImageCache {
public:
    ImageCache(int height, int width) : height_(height), width_(width) {}

    const PreparedImage& get(const ImageRecord& record) {
        const std::string key = record.path.string();
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        PreparedImage prep = prepare_image_file(record.path, height_, width_);
        prep.source_id = record.id;
        return cache_.emplace(key, std::move(prep)).first->second;
    }

    void clear() { cache_.clear(); }

private:
    int height_, width_;
    std::unordered_map<std::string, PreparedImage> cache_;
};

}  // namespace xsim
