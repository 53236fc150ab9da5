#include "advplace/geometry.hpp"

#include <algorithm>
#include <sstream>

#include "advplace/error.hpp"

namespace advplace {

Point Domain::clamp(Point p) const {
  return {std::clamp(p.x, xmin, xmax), std::clamp(p.y, ymin, ymax)};
}

bool Domain::intersects(const Domain& other) const {
  return other.xmin <= xmax && other.xmax >= xmin && other.ymin <= ymax && other.ymax >= ymin;
}

void Domain::validate() const {
  const bool finite = std::isfinite(xmin) && std::isfinite(xmax) && std::isfinite(ymin) &&
                      std::isfinite(ymax);
  if (!finite || !(xmax > xmin) || !(ymax > ymin)) {
    std::ostringstream msg;
    msg << "invalid domain [" << xmin << ", " << xmax << "] x [" << ymin << ", " << ymax
        << "]: need xmax > xmin and ymax > ymin";
    throw InputError(msg.str());
  }
}

}  // namespace advplace
