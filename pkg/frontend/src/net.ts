/** A small encoder-decoder segmentation network with hand-written backprop.
 *
 * Three resolution levels, additive skip connections, ReLU activations and a
 * 1x1 head producing three class logits per pixel. Inputs are six planes
 * (two modalities x three consecutive slices); the dual-encoder variant
 * gives each modality its own first-level encoder and fuses by addition.
 * All tensors are channel-major Float32Arrays ([c][y][x]).
 */

import { Rng } from "./rng.js";

const B1 = 0.9;
const B2 = 0.999;
const ADAM_EPS = 1e-8;

export class Conv2d {
  readonly cin: number;
  readonly cout: number;
  readonly k: number;
  readonly pad: number;
  w: Float32Array;
  b: Float32Array;
  gw: Float32Array;
  gb: Float32Array;
  private mw: Float32Array;
  private vw: Float32Array;
  private mb: Float32Array;
  private vb: Float32Array;
  private x: Float32Array | null = null;
  private hw = 0;
  private ww = 0;

  constructor(cin: number, cout: number, k: number, rng: Rng) {
    this.cin = cin;
    this.cout = cout;
    this.k = k;
    this.pad = (k - 1) >> 1;
    const fanIn = cin * k * k;
    const scale = Math.sqrt(2 / fanIn);
    this.w = new Float32Array(cout * fanIn);
    for (let i = 0; i < this.w.length; i++) this.w[i] = rng.gauss() * scale;
    this.b = new Float32Array(cout);
    this.gw = new Float32Array(this.w.length);
    this.gb = new Float32Array(cout);
    this.mw = new Float32Array(this.w.length);
    this.vw = new Float32Array(this.w.length);
    this.mb = new Float32Array(cout);
    this.vb = new Float32Array(cout);
  }

  forward(x: Float32Array, h: number, w: number): Float32Array {
    this.x = x;
    this.hw = h;
    this.ww = w;
    const { cin, cout, k, pad } = this;
    const W = this.w;
    const out = new Float32Array(cout * h * w);
    for (let co = 0; co < cout; co++) {
      out.fill(this.b[co], co * h * w, (co + 1) * h * w);
    }
    if (k === 1) {
      for (let co = 0; co < cout; co++) {
        const outBase = co * h * w;
        for (let ci = 0; ci < cin; ci++) {
          const wv = W[co * cin + ci];
          const inBase = ci * h * w;
          for (let i = 0; i < h * w; i++) out[outBase + i] += wv * x[inBase + i];
        }
      }
      return out;
    }
    for (let co = 0; co < cout; co++) {
      const outBase = co * h * w;
      for (let ci = 0; ci < cin; ci++) {
        const inBase = ci * h * w;
        const wb = (co * cin + ci) * 9;
        const w00 = W[wb];
        const w01 = W[wb + 1];
        const w02 = W[wb + 2];
        const w10 = W[wb + 3];
        const w11 = W[wb + 4];
        const w12 = W[wb + 5];
        const w20 = W[wb + 6];
        const w21 = W[wb + 7];
        const w22 = W[wb + 8];
        // fused interior: one pass, nine taps
        for (let oy = 1; oy < h - 1; oy++) {
          const c = inBase + oy * w;
          const o = outBase + oy * w;
          for (let ox = 1; ox < w - 1; ox++) {
            const up = c + ox - w;
            const dn = c + ox + w;
            out[o + ox] +=
              w00 * x[up - 1] + w01 * x[up] + w02 * x[up + 1] +
              w10 * x[c + ox - 1] + w11 * x[c + ox] + w12 * x[c + ox + 1] +
              w20 * x[dn - 1] + w21 * x[dn] + w22 * x[dn + 1];
          }
        }
        // borders: per-tap with bounds
        for (let ky = 0; ky < 3; ky++) {
          const dy = ky - pad;
          const oyLo = Math.max(0, -dy);
          const oyHi = Math.min(h, h - dy);
          for (let kx = 0; kx < 3; kx++) {
            const dx = kx - pad;
            const wv = W[wb + ky * 3 + kx];
            const oxLo = Math.max(0, -dx);
            const oxHi = Math.min(w, w - dx);
            for (let oy = oyLo; oy < oyHi; oy++) {
              const inner = oy >= 1 && oy < h - 1;
              const inRow = inBase + (oy + dy) * w + dx;
              const outRow = outBase + oy * w;
              if (inner) {
                if (oxLo === 0) out[outRow] += wv * x[inRow];
                if (oxHi === w && w - 1 >= Math.max(oxLo, 1)) {
                  out[outRow + w - 1] += wv * x[inRow + w - 1];
                }
              } else {
                for (let ox = oxLo; ox < oxHi; ox++) {
                  out[outRow + ox] += wv * x[inRow + ox];
                }
              }
            }
          }
        }
      }
    }
    return out;
  }

  backward(gy: Float32Array): Float32Array {
    const { cin, cout, k, pad } = this;
    const h = this.hw;
    const w = this.ww;
    const x = this.x!;
    const W = this.w;
    const gx = new Float32Array(cin * h * w);
    if (k === 1) {
      for (let co = 0; co < cout; co++) {
        const outBase = co * h * w;
        let gbAcc = 0;
        for (let i = 0; i < h * w; i++) gbAcc += gy[outBase + i];
        this.gb[co] += gbAcc;
        for (let ci = 0; ci < cin; ci++) {
          const inBase = ci * h * w;
          const wi = co * cin + ci;
          const wv = W[wi];
          let gwAcc = 0;
          for (let i = 0; i < h * w; i++) {
            const g = gy[outBase + i];
            gwAcc += g * x[inBase + i];
            gx[inBase + i] += wv * g;
          }
          this.gw[wi] += gwAcc;
        }
      }
      return gx;
    }
    for (let co = 0; co < cout; co++) {
      const outBase = co * h * w;
      let gbAcc = 0;
      for (let i = 0; i < h * w; i++) gbAcc += gy[outBase + i];
      this.gb[co] += gbAcc;
      for (let ci = 0; ci < cin; ci++) {
        const inBase = ci * h * w;
        const wb = (co * cin + ci) * 9;
        const w00 = W[wb];
        const w01 = W[wb + 1];
        const w02 = W[wb + 2];
        const w10 = W[wb + 3];
        const w11 = W[wb + 4];
        const w12 = W[wb + 5];
        const w20 = W[wb + 6];
        const w21 = W[wb + 7];
        const w22 = W[wb + 8];
        // fused interior gather for gx: tap (ky,kx) pulls gy[iy-ky+1][ix-kx+1]
        for (let iy = 1; iy < h - 1; iy++) {
          const ir = inBase + iy * w;
          const or_ = outBase + iy * w;
          for (let ix = 1; ix < w - 1; ix++) {
            const up = or_ + ix - w; // gy row iy-1 (tap ky=2)
            const dn = or_ + ix + w; // gy row iy+1 (tap ky=0)
            gx[ir + ix] +=
              w22 * gy[up - 1] + w21 * gy[up] + w20 * gy[up + 1] +
              w12 * gy[or_ + ix - 1] + w11 * gy[or_ + ix] + w10 * gy[or_ + ix + 1] +
              w02 * gy[dn - 1] + w01 * gy[dn] + w00 * gy[dn + 1];
          }
        }
        // fused interior reduction for gw: taps read x around each output px
        let a00 = 0, a01 = 0, a02 = 0, a10 = 0, a11 = 0, a12 = 0, a20 = 0, a21 = 0, a22 = 0;
        for (let oy = 1; oy < h - 1; oy++) {
          const c = inBase + oy * w;
          const o = outBase + oy * w;
          for (let ox = 1; ox < w - 1; ox++) {
            const g = gy[o + ox];
            const up = c + ox - w;
            const dn = c + ox + w;
            a00 += g * x[up - 1];
            a01 += g * x[up];
            a02 += g * x[up + 1];
            a10 += g * x[c + ox - 1];
            a11 += g * x[c + ox];
            a12 += g * x[c + ox + 1];
            a20 += g * x[dn - 1];
            a21 += g * x[dn];
            a22 += g * x[dn + 1];
          }
        }
        this.gw[wb] += a00;
        this.gw[wb + 1] += a01;
        this.gw[wb + 2] += a02;
        this.gw[wb + 3] += a10;
        this.gw[wb + 4] += a11;
        this.gw[wb + 5] += a12;
        this.gw[wb + 6] += a20;
        this.gw[wb + 7] += a21;
        this.gw[wb + 8] += a22;
        // gw corrections from border output pixels, per tap
        for (let ky = 0; ky < 3; ky++) {
          const dy = ky - pad;
          const oyLo = Math.max(0, -dy);
          const oyHi = Math.min(h, h - dy);
          for (let kx = 0; kx < 3; kx++) {
            const dx = kx - pad;
            const wi = wb + ky * 3 + kx;
            const oxLo = Math.max(0, -dx);
            const oxHi = Math.min(w, w - dx);
            let gwAcc = 0;
            for (let oy = oyLo; oy < oyHi; oy++) {
              const inner = oy >= 1 && oy < h - 1;
              const inRow = inBase + (oy + dy) * w + dx;
              const outRow = outBase + oy * w;
              if (inner) {
                if (oxLo === 0) gwAcc += gy[outRow] * x[inRow];
                if (oxHi === w && w - 1 >= Math.max(oxLo, 1)) {
                  gwAcc += gy[outRow + w - 1] * x[inRow + w - 1];
                }
              } else {
                for (let ox = oxLo; ox < oxHi; ox++) {
                  gwAcc += gy[outRow + ox] * x[inRow + ox];
                }
              }
            }
            this.gw[wi] += gwAcc;
          }
        }
        // gx for border input pixels: bounds-checked gather
        const gatherBorder = (iy: number, ix: number) => {
          let acc = 0;
          for (let ky = 0; ky < 3; ky++) {
            const oy = iy - ky + pad;
            if (oy < 0 || oy >= h) continue;
            for (let kx = 0; kx < 3; kx++) {
              const ox = ix - kx + pad;
              if (ox < 0 || ox >= w) continue;
              acc += W[wb + ky * 3 + kx] * gy[outBase + oy * w + ox];
            }
          }
          gx[inBase + iy * w + ix] += acc;
        };
        for (let ix = 0; ix < w; ix++) {
          gatherBorder(0, ix);
          if (h > 1) gatherBorder(h - 1, ix);
        }
        for (let iy = 1; iy < h - 1; iy++) {
          gatherBorder(iy, 0);
          if (w > 1) gatherBorder(iy, w - 1);
        }
      }
    }
    return gx;
  }

  zeroGrad(): void {
    this.gw.fill(0);
    this.gb.fill(0);
  }

  adamStep(lr: number, t: number): void {
    const c1 = 1 - Math.pow(B1, t);
    const c2 = 1 - Math.pow(B2, t);
    for (let i = 0; i < this.w.length; i++) {
      const g = this.gw[i];
      this.mw[i] = B1 * this.mw[i] + (1 - B1) * g;
      this.vw[i] = B2 * this.vw[i] + (1 - B2) * g * g;
      this.w[i] -= (lr * (this.mw[i] / c1)) / (Math.sqrt(this.vw[i] / c2) + ADAM_EPS);
    }
    for (let i = 0; i < this.b.length; i++) {
      const g = this.gb[i];
      this.mb[i] = B1 * this.mb[i] + (1 - B1) * g;
      this.vb[i] = B2 * this.vb[i] + (1 - B2) * g * g;
      this.b[i] -= (lr * (this.mb[i] / c1)) / (Math.sqrt(this.vb[i] / c2) + ADAM_EPS);
    }
  }
}

function relu(x: Float32Array): { y: Float32Array; mask: Uint8Array } {
  const y = new Float32Array(x.length);
  const mask = new Uint8Array(x.length);
  for (let i = 0; i < x.length; i++) {
    if (x[i] > 0) {
      y[i] = x[i];
      mask[i] = 1;
    }
  }
  return { y, mask };
}

function reluBackward(gy: Float32Array, mask: Uint8Array): Float32Array {
  const gx = new Float32Array(gy.length);
  for (let i = 0; i < gy.length; i++) if (mask[i]) gx[i] = gy[i];
  return gx;
}

function maxPool2(x: Float32Array, c: number, h: number, w: number) {
  const oh = h >> 1;
  const ow = w >> 1;
  const y = new Float32Array(c * oh * ow);
  const idx = new Int32Array(c * oh * ow);
  for (let ci = 0; ci < c; ci++) {
    const ib = ci * h * w;
    const ob = ci * oh * ow;
    for (let oy = 0; oy < oh; oy++) {
      for (let ox = 0; ox < ow; ox++) {
        const i00 = ib + 2 * oy * w + 2 * ox;
        const i01 = i00 + 1;
        const i10 = i00 + w;
        const i11 = i10 + 1;
        let best = i00;
        if (x[i01] > x[best]) best = i01;
        if (x[i10] > x[best]) best = i10;
        if (x[i11] > x[best]) best = i11;
        y[ob + oy * ow + ox] = x[best];
        idx[ob + oy * ow + ox] = best;
      }
    }
  }
  return { y, idx, oh, ow };
}

function maxPool2Backward(gy: Float32Array, idx: Int32Array, inSize: number): Float32Array {
  const gx = new Float32Array(inSize);
  for (let i = 0; i < gy.length; i++) gx[idx[i]] += gy[i];
  return gx;
}

function upsample2(x: Float32Array, c: number, h: number, w: number): Float32Array {
  const oh = h * 2;
  const ow = w * 2;
  const y = new Float32Array(c * oh * ow);
  for (let ci = 0; ci < c; ci++) {
    const ib = ci * h * w;
    const ob = ci * oh * ow;
    for (let iy = 0; iy < h; iy++) {
      for (let ix = 0; ix < w; ix++) {
        const v = x[ib + iy * w + ix];
        const o = ob + 2 * iy * ow + 2 * ix;
        y[o] = v;
        y[o + 1] = v;
        y[o + ow] = v;
        y[o + ow + 1] = v;
      }
    }
  }
  return y;
}

function upsample2Backward(gy: Float32Array, c: number, h: number, w: number): Float32Array {
  // h, w are the *input* (coarse) dims
  const ow = w * 2;
  const gx = new Float32Array(c * h * w);
  for (let ci = 0; ci < c; ci++) {
    const ib = ci * h * w;
    const ob = ci * h * 2 * ow;
    for (let iy = 0; iy < h; iy++) {
      for (let ix = 0; ix < w; ix++) {
        const o = ob + 2 * iy * ow + 2 * ix;
        gx[ib + iy * w + ix] = gy[o] + gy[o + 1] + gy[o + ow] + gy[o + ow + 1];
      }
    }
  }
  return gx;
}

export interface NetConfig {
  dualEncoder: boolean;
  baseChannels: number;
}

export const IN_CHANNELS = 6; // two modalities x three consecutive slices

export class SegNet {
  readonly cfg: NetConfig;
  readonly layers: Conv2d[];
  private enc1A: Conv2d;
  private enc1B: Conv2d | null;
  private enc2: Conv2d;
  private bott: Conv2d;
  private dec2: Conv2d;
  private dec1: Conv2d;
  private head: Conv2d;
  private out1x1: Conv2d;
  private cache: any = null;

  constructor(cfg: NetConfig, rng: Rng) {
    this.cfg = cfg;
    const c = cfg.baseChannels;
    if (cfg.dualEncoder) {
      this.enc1A = new Conv2d(3, c, 3, rng);
      this.enc1B = new Conv2d(3, c, 3, rng);
    } else {
      this.enc1A = new Conv2d(IN_CHANNELS, c, 3, rng);
      this.enc1B = null;
    }
    this.enc2 = new Conv2d(c, 2 * c, 3, rng);
    this.bott = new Conv2d(2 * c, 4 * c, 3, rng);
    this.dec2 = new Conv2d(4 * c, 2 * c, 3, rng);
    this.dec1 = new Conv2d(2 * c, c, 3, rng);
    this.head = new Conv2d(c, c, 3, rng);
    this.out1x1 = new Conv2d(c, 3, 1, rng);
    this.layers = [
      this.enc1A,
      ...(this.enc1B ? [this.enc1B] : []),
      this.enc2,
      this.bott,
      this.dec2,
      this.dec1,
      this.head,
      this.out1x1,
    ];
  }

  /** x: 6 channel planes (t2w z-1,z,z+1 then adc z-1,z,z+1), size 6*h*w. */
  forward(x: Float32Array, h: number, w: number): Float32Array {
    const c = this.cfg.baseChannels;
    let pre1: Float32Array;
    if (this.enc1B) {
      const a = this.enc1A.forward(x.subarray(0, 3 * h * w) as Float32Array, h, w);
      const b = this.enc1B.forward(x.subarray(3 * h * w) as Float32Array, h, w);
      pre1 = a;
      for (let i = 0; i < pre1.length; i++) pre1[i] += b[i];
    } else {
      pre1 = this.enc1A.forward(x, h, w);
    }
    const r1 = relu(pre1);
    const p1 = maxPool2(r1.y, c, h, w);
    const r2 = relu(this.enc2.forward(p1.y, p1.oh, p1.ow));
    const p2 = maxPool2(r2.y, 2 * c, p1.oh, p1.ow);
    const rb = relu(this.bott.forward(p2.y, p2.oh, p2.ow));
    const rd2 = relu(this.dec2.forward(rb.y, p2.oh, p2.ow));
    const u2 = upsample2(rd2.y, 2 * c, p2.oh, p2.ow);
    for (let i = 0; i < u2.length; i++) u2[i] += r2.y[i]; // skip add
    const rd1 = relu(this.dec1.forward(u2, p1.oh, p1.ow));
    const u1 = upsample2(rd1.y, c, p1.oh, p1.ow);
    for (let i = 0; i < u1.length; i++) u1[i] += r1.y[i]; // skip add
    const rh = relu(this.head.forward(u1, h, w));
    const logits = this.out1x1.forward(rh.y, h, w);
    this.cache = { h, w, r1, p1, r2, p2, rb, rd2, rd1, rh };
    return logits;
  }

  backward(gLogits: Float32Array): void {
    const { h, w, r1, p1, r2, p2, rb, rd2, rd1, rh } = this.cache;
    const c = this.cfg.baseChannels;
    const gRh = reluBackward(this.out1x1.backward(gLogits), rh.mask);
    const gU1 = this.head.backward(gRh);
    // skip add: gradient reaches both the upsampled path and r1
    const gRd1 = reluBackward(upsample2Backward(gU1, c, p1.oh, p1.ow), rd1.mask);
    const gU2 = this.dec1.backward(gRd1);
    const gRd2 = reluBackward(upsample2Backward(gU2, 2 * c, p2.oh, p2.ow), rd2.mask);
    const gRb = reluBackward(this.dec2.backward(gRd2), rb.mask);
    const gP2 = this.bott.backward(gRb);
    const gR2full = maxPool2Backward(gP2, p2.idx, 2 * c * p1.oh * p1.ow);
    for (let i = 0; i < gR2full.length; i++) gR2full[i] += gU2[i]; // skip
    const gR2 = reluBackward(gR2full, r2.mask);
    const gP1 = this.enc2.backward(gR2);
    const gR1full = maxPool2Backward(gP1, p1.idx, c * h * w);
    for (let i = 0; i < gR1full.length; i++) gR1full[i] += gU1[i]; // skip
    const gR1 = reluBackward(gR1full, r1.mask);
    if (this.enc1B) {
      this.enc1A.backward(gR1);
      this.enc1B.backward(gR1);
    } else {
      this.enc1A.backward(gR1);
    }
  }

  zeroGrad(): void {
    for (const layer of this.layers) layer.zeroGrad();
  }

  adamStep(lr: number, t: number): void {
    for (const layer of this.layers) layer.adamStep(lr, t);
  }

  serialize(): object {
    return {
      config: this.cfg,
      layers: this.layers.map((l) => ({
        cin: l.cin,
        cout: l.cout,
        k: l.k,
        w: Buffer.from(l.w.buffer, l.w.byteOffset, l.w.byteLength).toString("base64"),
        b: Buffer.from(l.b.buffer, l.b.byteOffset, l.b.byteLength).toString("base64"),
      })),
    };
  }

  static deserialize(obj: any): SegNet {
    const net = new SegNet(obj.config as NetConfig, new Rng(0));
    if (obj.layers.length !== net.layers.length) throw new Error("layer count mismatch");
    obj.layers.forEach((saved: any, i: number) => {
      const layer = net.layers[i];
      if (saved.cin !== layer.cin || saved.cout !== layer.cout || saved.k !== layer.k) {
        throw new Error(`layer ${i} shape mismatch`);
      }
      const wBuf = Buffer.from(saved.w, "base64");
      const bBuf = Buffer.from(saved.b, "base64");
      layer.w = new Float32Array(wBuf.buffer, wBuf.byteOffset, wBuf.byteLength / 4).slice();
      layer.b = new Float32Array(bBuf.buffer, bBuf.byteOffset, bBuf.byteLength / 4).slice();
    });
    return net;
  }
}
