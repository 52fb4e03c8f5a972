import init, {
  NstSession, ThresholdView, augment_rgba, corpus_rgba, image_size, random_augment_rgba,
} from "./pkg/styleforge_demo.js";

await init();
const size = image_size();
const $ = (id) => document.getElementById(id);

function paint(id, rgba) {
  const ctx = $(id).getContext("2d");
  ctx.putImageData(new ImageData(new Uint8ClampedArray(rgba), size, size), 0, 0);
}

// Style transfer.
let session = null;
let running = false;

function resetNst() {
  running = false;
  try {
    session = new NstSession(+$("nst-content").value, +$("nst-style").value, +$("nst-seed").value, +$("nst-lr").value);
  } catch (e) {
    $("nst-total").textContent = String(e);
    return;
  }
  paint("nst-c", session.content_rgba());
  paint("nst-s", session.style_rgba());
  showNst();
}

function showNst() {
  paint("nst-x", session.image_rgba());
  const f = (v) => (Number.isNaN(v) ? "–" : v.toExponential(3));
  $("nst-it").textContent = session.iteration();
  $("nst-total").textContent = f(session.total_loss());
  $("nst-lc").textContent = f(session.content_loss());
  $("nst-ls").textContent = f(session.style_loss());
}

function stepNst(n) {
  try {
    session.step(n);
  } catch (e) {
    running = false;
    $("nst-total").textContent = String(e);
  }
  showNst();
}

function loop() {
  if (!running) return;
  stepNst(2);
  requestAnimationFrame(loop);
}

for (const id of ["nst-content", "nst-style", "nst-seed", "nst-lr"]) $(id).addEventListener("change", resetNst);
$("nst-reset").onclick = resetNst;
$("nst-step").onclick = () => stepNst(10);
$("nst-run").onclick = () => {
  running = !running;
  loop();
};
resetNst();

// Augmentation.
function showAug() {
  const mal = $("aug-mal").checked;
  const idx = +$("aug-idx").value;
  for (const k of ["rot", "zoom", "shear"]) $(`aug-${k}-v`).textContent = $(`aug-${k}`).value;
  paint("aug-src", corpus_rgba(mal, idx));
  paint("aug-out", augment_rgba(mal, idx, +$("aug-rot").value, +$("aug-zoom").value, +$("aug-shear").value, $("aug-flip").checked));
}

for (const id of ["aug-mal", "aug-idx", "aug-rot", "aug-zoom", "aug-shear", "aug-flip"]) $(id).addEventListener("input", showAug);
$("aug-random").onclick = () => {
  paint("aug-out", random_augment_rgba($("aug-mal").checked, +$("aug-idx").value, Math.floor(Math.random() * 2 ** 32)));
};
showAug();

// Threshold explorer.
function showThreshold() {
  $("thr-sep-v").textContent = $("thr-sep").value;
  $("thr-skew-v").textContent = $("thr-skew").value;
  let view;
  try {
    view = new ThresholdView(+$("thr-n").value, +$("thr-sep").value, +$("thr-skew").value, +$("thr-seed").value);
  } catch (e) {
    $("thr-t").textContent = String(e);
    return;
  }
  const scores = view.scores();
  const truth = view.truth();
  const bins = 50;
  const counts = [new Array(bins).fill(0), new Array(bins).fill(0)];
  scores.forEach((s, i) => counts[truth[i]][Math.min(bins - 1, Math.floor(s * bins))]++);
  const peak = Math.max(1, ...counts[0].map((c, i) => c + counts[1][i]));

  const cv = $("hist");
  const ctx = cv.getContext("2d");
  const w = cv.width / bins;
  ctx.clearRect(0, 0, cv.width, cv.height);
  for (let b = 0; b < bins; b++) {
    const h0 = (counts[0][b] / peak) * cv.height;
    const h1 = (counts[1][b] / peak) * cv.height;
    ctx.fillStyle = "#7aa6d6";
    ctx.fillRect(b * w, cv.height - h0, w - 1, h0);
    ctx.fillStyle = "#d68a7a";
    ctx.fillRect(b * w, cv.height - h0 - h1, w - 1, h1);
  }
  const line = (x, colour) => {
    ctx.strokeStyle = colour;
    ctx.beginPath();
    ctx.moveTo(x * cv.width, 0);
    ctx.lineTo(x * cv.width, cv.height);
    ctx.stroke();
  };
  line(0.5, "#888");
  const t = view.threshold();
  if (!Number.isNaN(t)) line(t, "#c00");

  $("thr-t").textContent = Number.isNaN(t) ? "none (tied scores; rank split used)" : t.toFixed(4);
  $("thr-auc").textContent = view.auc().toFixed(3);
  $("thr-agree").textContent = (100 * view.agreement()).toFixed(1) + "%";
  $("thr-half").textContent = (100 * view.positive_rate_at(0.5)).toFixed(1) + "%";
  view.free();
}

for (const id of ["thr-n", "thr-sep", "thr-skew", "thr-seed"]) $(id).addEventListener("input", showThreshold);
showThreshold();
