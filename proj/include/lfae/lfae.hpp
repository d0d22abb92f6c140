#pragma once

#include "lfae/augment.hpp"
#include "lfae/codec_io.hpp"
#include "lfae/dataset.hpp"
#include "lfae/errors.hpp"
#include "lfae/grad_check.hpp"
#include "lfae/layers.hpp"
#include "lfae/light_field.hpp"
#include "lfae/metrics.hpp"
#include "lfae/model.hpp"
#include "lfae/optimizer.hpp"
#include "lfae/tensor.hpp"
#include "lfae/trainer.hpp"
