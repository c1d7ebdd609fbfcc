import init, { rate_curves, dmt_curve, beam_pattern } from "./pkg/dmimo_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

// series: [{ xs, ys, color }]
function plot(canvas, series, xLabel, yLabel) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 44;
  ctx.clearRect(0, 0, w, h);
  const xs = series.flatMap((s) => s.xs);
  const ys = series.flatMap((s) => s.ys);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(0, ...ys), Math.max(...ys) || 1];
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - y0) / (y1 - y0 || 1)) * (h - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillText(`${x0.toFixed(1)}`, pad, h - pad + 14);
  ctx.fillText(`${x1.toFixed(1)}`, w - pad - 20, h - pad + 14);
  ctx.fillText(`${y1.toFixed(2)}`, 4, pad + 4);
  ctx.fillText(`${y0.toFixed(2)}`, 4, h - pad);
  ctx.fillText(xLabel, w / 2 - 20, h - 8);
  ctx.fillText(yLabel, 4, pad - 12);

  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    s.xs.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(s.ys[i])) : ctx.moveTo(sx(x), sy(s.ys[i]))));
    ctx.stroke();
  }
}

function columns(flat, stride) {
  const cols = Array.from({ length: stride }, () => []);
  for (let i = 0; i < flat.length; i++) cols[i % stride].push(flat[i]);
  return cols;
}

function guarded(errId, f) {
  return () => {
    try {
      f();
      $(errId).textContent = "";
    } catch (e) {
      $(errId).textContent = String(e.message ?? e);
    }
  };
}

const drawRate = guarded("rate-err", () => {
  const [snr, rate, all, colo] = columns(rate_curves(num("rk"), num("rl"), num("rn"), 0, num("rmax"), 61), 4);
  plot($("rate"), [
    { xs: snr, ys: rate, color: "#1f77b4" },
    { xs: snr, ys: all, color: "#2ca02c" },
    { xs: snr, ys: colo, color: "#d62728" },
  ], "SNR (dB)", "bits/s/Hz");
});

const drawDmt = guarded("dmt-err", () => {
  const [d, g, gi] = columns(dmt_curve(num("dl"), 0.05), 3);
  plot($("dmt"), [
    { xs: d, ys: g, color: "#1f77b4" },
    { xs: d, ys: gi, color: "#ff7f0e" },
  ], "diversity gain d", "G_m(d)");
});

const drawBeam = guarded("beam-err", () => {
  $("bs-val").textContent = `${num("bs")}°`;
  const [az, gain] = columns(beam_pattern(num("bn"), num("bs"), 721), 2);
  plot($("beam"), [{ xs: az, ys: gain, color: "#9467bd" }], "azimuth (deg)", "|a(θ₀)ᴴa(θ)|");
});

await init();
for (const id of ["rk", "rl", "rn", "rmax"]) $(id).addEventListener("input", drawRate);
$("dl").addEventListener("input", drawDmt);
for (const id of ["bn", "bs"]) $(id).addEventListener("input", drawBeam);
drawRate();
drawDmt();
drawBeam();
