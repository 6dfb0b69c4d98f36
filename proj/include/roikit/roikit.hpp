#ifndef ROIKIT_ROIKIT_HPP
#define ROIKIT_ROIKIT_HPP

#include "roikit/branch_router.hpp"
#include "roikit/caroi_pool.hpp"
#include "roikit/error.hpp"
#include "roikit/eval.hpp"
#include "roikit/geometry.hpp"
#include "roikit/postprocess.hpp"
#include "roikit/tensor.hpp"

#include "roikit/harness/compare.hpp"
#include "roikit/harness/csv_io.hpp"
#include "roikit/harness/gradcheck.hpp"
#include "roikit/harness/pipeline.hpp"
#include "roikit/harness/scene.hpp"
#include "roikit/harness/tensor_io.hpp"

#endif  // ROIKIT_ROIKIT_HPP
