#include "potminer/trajectory.hpp"

#include <stdexcept>
#include <string>
#include <unordered_set>

namespace potminer {

void Shot::validate() const {
    if (num_frames < 0) {
        throw std::invalid_argument("shot " + std::to_string(shot_id) + ": negative num_frames");
    }
    std::unordered_set<int> ids;
    for (const auto& t : trajectories) {
        const std::string where = "shot " + std::to_string(shot_id) + ", trajectory " + std::to_string(t.id);
        if (t.points.size() < 2) {
            throw std::invalid_argument(where + ": fewer than 2 points");
        }
        if (t.fg.size() != t.points.size()) {
            throw std::invalid_argument(where + ": fg length " + std::to_string(t.fg.size()) +
                                        " != points length " + std::to_string(t.points.size()));
        }
        if (t.start_frame < 0 || t.end_frame() > num_frames) {
            throw std::invalid_argument(where + ": exceeds shot bounds [0, " +
                                        std::to_string(num_frames) + ")");
        }
        if (!ids.insert(t.id).second) {
            throw std::invalid_argument(where + ": duplicate trajectory id");
        }
    }
    if (frame_labels && static_cast<int>(frame_labels->size()) != num_frames) {
        throw std::invalid_argument("shot " + std::to_string(shot_id) +
                                    ": frame_labels length != num_frames");
    }
}

}  // namespace potminer
