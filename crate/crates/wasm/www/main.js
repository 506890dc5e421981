import init, { qberVsLambda, asymptoticVsDistance, finiteVsPulses, qberThreshold } from "./pkg/sixstate_wasm.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c"];

function values(section) {
  const out = {};
  for (const input of section.querySelectorAll("input")) out[input.name] = Number(input.value);
  return out;
}

// series: [{ xs, ys, label, dashed }]
function plot(canvas, series, { logX = false, logY = false, xLabel = "", yLabel = "" } = {}) {
  const dpr = window.devicePixelRatio || 1;
  const w = canvas.clientWidth, h = canvas.clientHeight;
  canvas.width = w * dpr;
  canvas.height = h * dpr;
  const ctx = canvas.getContext("2d");
  ctx.scale(dpr, dpr);
  ctx.clearRect(0, 0, w, h);

  const tx = logX ? Math.log10 : (v) => v;
  const ty = logY ? Math.log10 : (v) => v;
  const pts = series.flatMap((s) => s.xs.map((x, i) => [tx(x), ty(s.ys[i])]))
    .filter(([x, y]) => Number.isFinite(x) && Number.isFinite(y));
  if (pts.length === 0) return;
  let [x0, x1] = [Math.min(...pts.map((p) => p[0])), Math.max(...pts.map((p) => p[0]))];
  let [y0, y1] = [Math.min(...pts.map((p) => p[1])), Math.max(...pts.map((p) => p[1]))];
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const m = { l: 60, r: 110, t: 10, b: 40 };
  const sx = (x) => m.l + ((x - x0) / (x1 - x0)) * (w - m.l - m.r);
  const sy = (y) => h - m.b - ((y - y0) / (y1 - y0)) * (h - m.t - m.b);

  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "11px system-ui";
  ctx.strokeRect(m.l, m.t, w - m.l - m.r, h - m.t - m.b);
  const fmt = (v, log) => (log ? `1e${v.toFixed(1)}` : v.toPrecision(3));
  for (let i = 0; i <= 4; i++) {
    const xv = x0 + ((x1 - x0) * i) / 4, yv = y0 + ((y1 - y0) * i) / 4;
    ctx.fillText(fmt(xv, logX), sx(xv) - 15, h - m.b + 14);
    ctx.fillText(fmt(yv, logY), 4, sy(yv) + 4);
  }
  ctx.fillText(xLabel, (w - m.r) / 2, h - 6);
  ctx.fillText(yLabel, m.l + 4, m.t + 12);

  series.forEach((s, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.setLineDash(s.dashed ? [6, 4] : []);
    ctx.lineWidth = 2;
    ctx.beginPath();
    let pen = false;
    s.xs.forEach((x, i) => {
      const X = tx(x), Y = ty(s.ys[i]);
      if (!Number.isFinite(X) || !Number.isFinite(Y)) { pen = false; return; }
      pen ? ctx.lineTo(sx(X), sy(Y)) : ctx.moveTo(sx(X), sy(Y));
      pen = true;
    });
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(s.label, w - m.r + 8, m.t + 14 + 16 * k);
  });
}

function columns(flat, stride) {
  const cols = Array.from({ length: stride }, () => []);
  for (let i = 0; i < flat.length; i++) cols[i % stride].push(flat[i]);
  return cols;
}

function wire(id, draw) {
  const section = document.getElementById(id);
  const err = section.querySelector(".err");
  const run = () => {
    try {
      err.textContent = "";
      draw(section.querySelector("canvas"), values(section));
    } catch (e) {
      err.textContent = String(e.message ?? e);
    }
  };
  section.querySelectorAll("input").forEach((i) => i.addEventListener("change", run));
  run();
}

await init();
const eStar = qberThreshold();

wire("qber", (canvas, v) => {
  const [lam, e] = columns(qberVsLambda(v.L, v.etaD, v.etaM, 1e-3, 10, 120), 2);
  plot(canvas, [
    { xs: lam, ys: e, label: "QBER" },
    { xs: [lam[0], lam[lam.length - 1]], ys: [eStar, eStar], label: `threshold ${eStar.toFixed(4)}`, dashed: true },
  ], { logX: true, xLabel: "lambda", yLabel: "QBER" });
});

wire("asym", (canvas, v) => {
  const [L, , rate] = columns(asymptoticVsDistance(v.etaD, v.etaM, v.Lmax, 60), 3);
  plot(canvas, [{ xs: L, ys: rate.map((r) => (r > 0 ? r : NaN)), label: "rate" }],
    { logY: true, xLabel: "L (km)", yLabel: "bits / pulse" });
});

wire("finite", (canvas, v) => {
  const [n, rate, asym] = columns(finiteVsPulses(v.L, v.etaD, v.etaM, 4, 14, 41), 3);
  plot(canvas, [
    { xs: n, ys: rate.map((r) => (r > 0 ? r : NaN)), label: "finite" },
    { xs: n, ys: asym, label: "asymptotic", dashed: true },
  ], { logX: true, logY: true, xLabel: "N_source", yLabel: "bits / pulse" });
});
