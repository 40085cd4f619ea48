import init, { nodes, theta0_curve, ProfileDemo, WaveDemo } from "./pkg/contact_wave_web.js";

const $ = (id) => document.getElementById(id);

function plot(canvas, x, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  let lo = opts.ymin ?? Infinity, hi = opts.ymax ?? -Infinity;
  if (opts.ymin === undefined || opts.ymax === undefined) {
    for (const s of series) for (const v of s.y) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  }
  if (hi - lo < 1e-12) { hi += 1e-6; lo -= 1e-6; }
  const pad = 0.05 * (hi - lo);
  lo -= pad; hi += pad;
  const x0 = x[0], x1 = x[x.length - 1];
  const px = (v) => ((v - x0) / (x1 - x0)) * (w - 50) + 45;
  const py = (v) => h - 20 - ((v - lo) / (hi - lo)) * (h - 30);
  ctx.strokeStyle = "#999";
  ctx.beginPath(); ctx.moveTo(45, 10); ctx.lineTo(45, h - 20); ctx.lineTo(w - 5, h - 20); ctx.stroke();
  ctx.fillStyle = "#555"; ctx.font = "11px sans-serif";
  ctx.fillText(hi.toPrecision(3), 2, 16); ctx.fillText(lo.toPrecision(3), 2, h - 22);
  ctx.fillText(x0.toPrecision(3), 45, h - 5); ctx.fillText(x1.toPrecision(3), w - 40, h - 5);
  for (const s of series) {
    ctx.strokeStyle = s.color; ctx.lineWidth = 1.5;
    ctx.beginPath();
    s.y.forEach((v, i) => (i ? ctx.lineTo(px(x[i]), py(v)) : ctx.moveTo(px(x[i]), py(v))));
    ctx.stroke();
  }
}

function report(el, fn) {
  try { fn(); } catch (e) { el.textContent = `error: ${e.message ?? e}`; }
}

// initial temperature
function drawCurve() {
  const L = +$("c-width").value, n = 801;
  report($("curve"), () => {
    const x = nodes(L, n);
    const y = theta0_curve(+$("c-theta").value, +$("c-delta").value, L, n);
    plot($("curve"), x, [{ y, color: "#c03" }]);
  });
}

// profile evolution
const P = { L: 80, n: 641, demo: null, x: null, playing: false };
function resetProfile() {
  report($("p-readout"), () => {
    P.demo = new ProfileDemo(+$("p-theta").value, 9, P.L, P.n);
    P.x = nodes(P.L, P.n);
    drawProfile();
  });
}
function drawProfile() {
  const d = P.demo;
  const [n1, n2, n3] = d.log_norms();
  plot($("profile"), P.x, [
    { y: d.linear(), color: "#06c" },
    { y: d.theta(), color: "#c03" },
  ]);
  $("p-readout").textContent =
    `t = ${d.t().toFixed(2)}   |(ln Θ)_x|² = ${n1.toExponential(3)}   |(ln Θ)_xx|² = ${n2.toExponential(3)}   |(ln Θ)_xxx|² = ${n3.toExponential(3)}`;
}
function tickProfile() {
  if (!P.playing) return;
  report($("p-readout"), () => {
    P.demo.advance_to(Math.max(0.05, P.demo.t() * 1.05));
    drawProfile();
  });
  if (P.demo.t() < 400) requestAnimationFrame(tickProfile); else P.playing = false;
}

// perturbation decay
const W = { L: 60, n: 601, demo: null, x: null, playing: false };
function resetWave() {
  report($("w-readout"), () => {
    W.demo = new WaveDemo(0.5, +$("w-amp").value, +$("w-width").value, W.L, W.n);
    W.x = nodes(W.L, W.n);
    drawWave();
  });
}
function drawWave() {
  const f = W.demo.perturbation_fields(), n = W.n;
  const amp = Math.max(1e-12, +$("w-amp").value);
  plot($("wave"), W.x, [
    { y: f.slice(0, n), color: "#c03" },
    { y: f.slice(n, 2 * n), color: "#090" },
    { y: f.slice(2 * n), color: "#06c" },
  ], { ymin: -amp, ymax: amp });
  const h = W.demo.history();
  const t = [], v = [];
  for (let i = 0; i < h.length; i += 2) { t.push(h[i]); v.push(h[i + 1]); }
  if (t.length > 1) plot($("decay"), t, [{ y: v, color: "#333" }], { ymin: 0 });
  $("w-readout").textContent = `t = ${W.demo.t().toFixed(2)}   |(φ, ψ, ζ)|_∞ = ${v[v.length - 1].toExponential(3)}`;
}
function tickWave() {
  if (!W.playing) return;
  report($("w-readout"), () => {
    W.demo.advance_to(W.demo.t() + 0.25);
    drawWave();
  });
  if (W.demo.t() < 30) requestAnimationFrame(tickWave); else W.playing = false;
}

await init();
for (const id of ["c-theta", "c-delta", "c-width"]) $(id).addEventListener("input", drawCurve);
$("p-reset").onclick = () => { P.playing = false; resetProfile(); };
$("p-theta").addEventListener("change", () => { P.playing = false; resetProfile(); });
$("p-play").onclick = () => { if (!P.playing) { P.playing = true; tickProfile(); } };
$("w-reset").onclick = () => { W.playing = false; resetWave(); };
$("w-play").onclick = () => { if (!W.playing) { W.playing = true; tickWave(); } };
drawCurve();
resetProfile();
resetWave();
