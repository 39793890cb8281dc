#pragma once

#include "cpm1bit/common.hpp"
#include "cpm1bit/cpm.hpp"
#include "cpm1bit/mvn.hpp"
#include "cpm1bit/trellis.hpp"
#include "cpm1bit/frontend.hpp"
#include "cpm1bit/channel_law.hpp"
#include "cpm1bit/mapping.hpp"
#include "cpm1bit/bcjr.hpp"
#include "cpm1bit/fec.hpp"
#include "cpm1bit/turbo.hpp"
#include "cpm1bit/sim.hpp"
