#pragma once

#include "vfunnel/attention.hpp"
#include "vfunnel/dump.hpp"
#include "vfunnel/error.hpp"
#include "vfunnel/numeric.hpp"
#include "vfunnel/geometry.hpp"
#include "vfunnel/image_io.hpp"
#include "vfunnel/imaging.hpp"
#include "vfunnel/manifest.hpp"
#include "vfunnel/pipeline.hpp"
#include "vfunnel/portfolio.hpp"
#include "vfunnel/run_config.hpp"
