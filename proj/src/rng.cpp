#include "structinfer/rng.hpp"

#include "structinfer/inference.hpp"

namespace structinfer {

double CounterRng::gaussian() { return normal_quantile(uniform()); }

}  // namespace structinfer
