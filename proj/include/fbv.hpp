#pragma once

#include "fbv/bgmodel.hpp"
#include "fbv/bgtemplate.hpp"
#include "fbv/config.hpp"
#include "fbv/container.hpp"
#include "fbv/core.hpp"
#include "fbv/decode_pipeline.hpp"
#include "fbv/entropy.hpp"
#include "fbv/fgregion.hpp"
#include "fbv/metrics.hpp"
#include "fbv/motion.hpp"
#include "fbv/pipeline.hpp"
#include "fbv/quantizer.hpp"
#include "fbv/reports.hpp"
#include "fbv/residual_codec.hpp"
#include "fbv/transform.hpp"
#include "fbv/video_io.hpp"
