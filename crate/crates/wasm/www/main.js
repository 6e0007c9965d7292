import init, { sample_prior, BarsDemo } from "./pkg/dynlfm_wasm.js";

const $ = (id) => document.getElementById(id);

function drawGrid(canvas, rows, cols, values, cell, colour) {
  canvas.width = cols * cell;
  canvas.height = rows * cell;
  const ctx = canvas.getContext("2d");
  for (let r = 0; r < rows; r++) {
    for (let c = 0; c < cols; c++) {
      ctx.fillStyle = colour(values[r * cols + c]);
      ctx.fillRect(c * cell, r * cell, cell, cell);
    }
  }
}

const grey = (lo, hi) => (v) => {
  if (Number.isNaN(v)) return "#c8c8ff";
  const t = Math.max(0, Math.min(1, (v - lo) / (hi - lo)));
  const g = Math.round(255 * (1 - t));
  return `rgb(${g},${g},${g})`;
};

function drawPrior() {
  const draw = sample_prior(+$("p-n").value, +$("p-alpha").value, +$("p-rho").value, BigInt($("p-seed").value));
  const rows = draw.n_rows(), cols = draw.n_features();
  const active = draw.active();
  const max = Math.max(1, ...active);
  let total = 0;
  for (const a of active) total += a;
  $("p-stats").textContent = `${cols} features, ${(total / rows).toFixed(2)} active instances per observation`;
  drawGrid($("p-canvas"), rows, Math.max(cols, 1), active, 6, grey(0, max));
  draw.free();
}

let demo = null;
let running = false;

function drawFrame() {
  const n = +$("b-frame").value;
  $("b-frame-no").textContent = n;
  drawGrid($("b-obs"), 6, 6, demo.observation(n), 20, grey(-0.5, 1.5));
}

function drawSampler() {
  const mse = demo.heldout_mse();
  $("b-stats").textContent =
    `iteration ${demo.iteration()}  features ${demo.n_features()}  ` +
    `persistence ${demo.avg_persistence().toFixed(2)}  σ²_X ${demo.sigma2_x().toFixed(3)}  ` +
    `held-out MSE ${Number.isNaN(mse) ? "-" : mse.toFixed(3)}`;
  const feats = demo.features();
  const box = $("features");
  box.replaceChildren();
  for (let k = 0; k < feats.length / 36; k++) {
    const c = document.createElement("canvas");
    drawGrid(c, 6, 6, feats.slice(k * 36, (k + 1) * 36), 8, grey(-0.2, 1.2));
    box.appendChild(c);
  }
}

function newDemo() {
  if (demo) demo.free();
  demo = new BarsDemo(BigInt($("b-seed").value), 500, +$("b-noise").value, $("b-model").value === "1", 20);
  $("b-frame").max = demo.n_rows() - 1;
  drawFrame();
  drawSampler();
}

function loop() {
  if (!running) return;
  demo.step(2);
  drawSampler();
  requestAnimationFrame(loop);
}

await init();
$("p-draw").onclick = drawPrior;
$("b-new").onclick = () => { running = false; $("b-run").textContent = "Run"; newDemo(); };
$("b-frame").oninput = drawFrame;
$("b-step").onclick = () => { demo.step(10); drawSampler(); };
$("b-run").onclick = () => {
  running = !running;
  $("b-run").textContent = running ? "Pause" : "Run";
  loop();
};
drawPrior();
newDemo();
