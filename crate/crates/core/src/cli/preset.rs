use std::str::FromStr;

use crate::loopnest::{parse_nest, LoopNest};

/// Shape of the blocked 2-D convolution whose three innermost loops are a
/// GEMM microkernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvPreset {
    pub n_img: i64,
    pub n_ofm: i64,
    pub n_ifm: i64,
    pub ofh: i64,
    pub ofw: i64,
    pub kh: i64,
    pub kw: i64,
    pub stride_h: i64,
    pub stride_w: i64,
    pub gemm_block: i64,
}

impl Default for ConvPreset {
    fn default() -> Self {
        Self { n_img: 2, n_ofm: 32, n_ifm: 32, ofh: 4, ofw: 4, kh: 3, kw: 3, stride_h: 1, stride_w: 1, gemm_block: 16 }
    }
}

impl ConvPreset {
    pub fn from_values(v: [i64; 10]) -> Result<Self, String> {
        let p = Self {
            n_img: v[0],
            n_ofm: v[1],
            n_ifm: v[2],
            ofh: v[3],
            ofw: v[4],
            kh: v[5],
            kw: v[6],
            stride_h: v[7],
            stride_w: v[8],
            gemm_block: v[9],
        };
        if let Some(x) = v.iter().find(|&&x| x <= 0) {
            return Err(format!("preset values must be positive, found {x}"));
        }
        if p.n_ofm % p.gemm_block != 0 || p.n_ifm % p.gemm_block != 0 {
            return Err(format!(
                "nOfm ({}) and nIfm ({}) must be multiples of GEMM_BLOCK ({})",
                p.n_ofm, p.n_ifm, p.gemm_block
            ));
        }
        Ok(p)
    }

    /// Nest-description document for the preset.
    pub fn document(&self) -> String {
        format!(
            "\
# blocked 2-D convolution, GEMM microkernel over oi, ofm, ifm
param nImg = {}
param nOfm = {}
param nIfm = {}
param ofh = {}
param ofw = {}
param kh = {}
param kw = {}
param STRIDE_H = {}
param STRIDE_W = {}
param GEMM_BLOCK = {}
annotation #pragma omp parallel for private(ofm_tile, ifm_tile, ij, oj, kj, ki, ii)
loop img lower 0 upper nImg
loop ofm_tile lower 0 upper nOfm / GEMM_BLOCK
loop ifm_tile lower 0 upper nIfm / GEMM_BLOCK
loop oj lower 0 upper ofh
let ij = oj * STRIDE_H
loop kj lower 0 upper kh
loop ki lower 0 upper kw
loop oi lower 0 upper ofw
let ii = oi * STRIDE_W
loop ofm lower 0 upper GEMM_BLOCK
loop ifm lower 0 upper GEMM_BLOCK
statement S
  read output[img][ofm_tile][oj][oi][ofm]
  read filter[ofm_tile][ifm_tile][kj][ki][ifm][ofm]
  read input[img][ifm_tile][ij + kj][ii + ki][ifm]
  write output[img][ofm_tile][oj][oi][ofm]
  body output[img][ofm_tile][oj][oi][ofm] += filter[ofm_tile][ifm_tile][kj][ki][ifm][ofm] * input[img][ifm_tile][ij+kj][ii+ki][ifm];
end
microkernel gemm_microkernel
  band oi ofm ifm
  arg &filter[ofm_tile][ifm_tile][kj][ki][0][0]
  arg &input[img][ifm_tile][ij + kj][ki][0]
  arg &output[img][ofm_tile][oj][0][0]
end
",
            self.n_img,
            self.n_ofm,
            self.n_ifm,
            self.ofh,
            self.ofw,
            self.kh,
            self.kw,
            self.stride_h,
            self.stride_w,
            self.gemm_block
        )
    }

    pub fn nest(&self) -> LoopNest {
        parse_nest(&self.document()).expect("preset document parses")
    }
}

impl FromStr for ConvPreset {
    type Err = String;

    /// `conv:2,32,32,4,4,3,3,1,1,16`, or bare `conv` for the defaults.
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let rest = s.strip_prefix("conv").ok_or_else(|| format!("unknown preset `{s}`"))?;
        if rest.is_empty() {
            return Ok(Self::default());
        }
        let rest = rest.strip_prefix(':').ok_or_else(|| format!("unknown preset `{s}`"))?;
        let vals: Vec<i64> = rest
            .split(',')
            .map(|v| v.trim().parse().map_err(|_| format!("`{v}` is not an integer")))
            .collect::<Result<_, _>>()?;
        let vals: [i64; 10] =
            vals.try_into().map_err(|v: Vec<i64>| format!("conv preset takes 10 values, found {}", v.len()))?;
        Self::from_values(vals)
    }
}
