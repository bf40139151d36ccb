#pragma once

#include "lact/ctnet.hpp"
#include "lact/error.hpp"
#include "lact/fbp.hpp"
#include "lact/geometry.hpp"
#include "lact/image.hpp"
#include "lact/io.hpp"
#include "lact/metrics.hpp"
#include "lact/nn/adam.hpp"
#include "lact/nn/gradcheck.hpp"
#include "lact/nn/layers.hpp"
#include "lact/nn/network.hpp"
#include "lact/nn/tensor.hpp"
#include "lact/phantom.hpp"
#include "lact/pipeline.hpp"
#include "lact/projector.hpp"
#include "lact/report.hpp"
#include "lact/segmentation.hpp"
#include "lact/stats.hpp"
#include "lact/volume.hpp"
#include "lact/wls.hpp"
