/** Console entry point: card rendering, verdict handling, keyboard
 * shortcuts, and the 1 Hz dashboard poll. */

import { EngineClient } from './api.js';
import { arGainedSeries, arRankSeries, renderLineChart, renderSparkline } from './charts.js';
import { glyphSvg } from './glyph.js';
import { CardBuffer } from './queue.js';
import { PairCard, TrackletPanel, Verdict } from './types.js';

const params = new URLSearchParams(window.location.search);
const client = new EngineClient({
  baseUrl: params.get('api') ?? '',
  token: params.get('token') ?? undefined,
});
const buffer = new CardBuffer(client, 3);

const el = (id: string) => document.getElementById(id) as HTMLElement;

let rendered: PairCard | null = null;
let submitting = false;
const clusterCounts: number[] = [];

function panelHtml(panel: TrackletPanel): string {
  const thumbs = panel.images
    .map((img) =>
      img.image_path
        ? `<img class="thumb" loading="lazy" src="${img.image_path}" alt="image ${img.image_id}"/>`
        : `<span class="thumb">${glyphSvg(img.feature, 64)}</span>`,
    )
    .join('');
  return (
    `<div class="panel"><div class="panel-head">tracklet ${panel.tracklet_id}` +
    `<span class="badge">cam ${panel.camera_id}</span></div>` +
    `<div class="thumbs">${thumbs}</div></div>`
  );
}

function renderCard(): void {
  const card = buffer.current();
  rendered = card;
  const stage = el('card-stage');
  const buttons = document.querySelectorAll<HTMLButtonElement>('.verdict');
  if (!card) {
    stage.innerHTML = '<p class="empty">Queue is empty — waiting for the engine…</p>';
    buttons.forEach((b) => (b.disabled = true));
    return;
  }
  stage.innerHTML =
    `<div class="pair-meta">pair ${card.pair[0]} / ${card.pair[1]}` +
    (card.distance !== null ? ` · distance ${card.distance.toFixed(4)}` : '') +
    '</div>' +
    `<div class="panels">${panelHtml(card.tracklets[0])}${panelHtml(card.tracklets[1])}</div>`;
  // both panels are in the DOM now; only then may verdicts be submitted
  buttons.forEach((b) => (b.disabled = false));
}

function notice(text: string): void {
  const box = el('notice');
  box.textContent = text;
  box.classList.add('visible');
  window.setTimeout(() => box.classList.remove('visible'), 2500);
}

async function pump(): Promise<void> {
  try {
    await buffer.fill();
  } catch {
    notice('network trouble — retrying');
  }
  renderCard();
}

async function submit(verdict: Verdict): Promise<void> {
  const card = rendered;
  if (!card || submitting) return;
  submitting = true;
  try {
    const outcome = await client.submitVerdict(card.pairId, verdict);
    if (outcome.kind === 'conflict') {
      notice(`pair ${card.pairId} was already answered`);
      buffer.dismiss(card.pairId);
    } else {
      buffer.advance();
    }
    await pump();
  } catch {
    notice('verdict not delivered — card kept, retry shortly');
  } finally {
    submitting = false;
  }
}

async function refreshDashboard(): Promise<void> {
  try {
    const [metrics, clusters] = await Promise.all([client.metrics(), client.clusters()]);
    el('stat-manual').textContent = String(metrics.tp_manual);
    el('stat-auto').textContent = String(metrics.auto_count);
    el('stat-ar').textContent = metrics.AR === null ? '–' : metrics.AR.toFixed(3);
    el('stat-gained').textContent =
      metrics.gained_TP_ratio === null ? '–' : metrics.gained_TP_ratio.toFixed(3);
    el('stat-clusters').textContent = String(clusters.cluster_count);
    el('chart-gained').innerHTML = renderLineChart(arGainedSeries(metrics.history), {
      title: 'gained TP ratio vs annotation ratio',
      xLabel: 'AR',
      yLabel: 'gained TP',
    });
    el('chart-rank').innerHTML = renderLineChart(arRankSeries(metrics.history), {
      title: 'rank-1 vs annotation ratio',
      xLabel: 'AR',
      yLabel: 'rank-1',
    });
    if (
      clusterCounts.length === 0 ||
      clusterCounts[clusterCounts.length - 1] !== clusters.cluster_count
    ) {
      clusterCounts.push(clusters.cluster_count);
    }
    el('spark-clusters').innerHTML = renderSparkline(clusterCounts);
  } catch {
    // poll again on the next tick; the dashboard is read-only
  }
}

client.onGenerationChange = (generation) => {
  el('stat-generation').textContent = String(generation);
  // a new iteration may have invalidated prefetched cards
  buffer.clear();
  void pump();
  void refreshDashboard();
};

document.querySelectorAll<HTMLButtonElement>('.verdict').forEach((button) => {
  button.addEventListener('click', () => void submit(button.dataset.verdict as Verdict));
});

document.addEventListener('keydown', (event) => {
  if (event.target instanceof HTMLInputElement) return;
  const map: Record<string, Verdict> = { m: 'match', n: 'nomatch', s: 'skip' };
  const verdict = map[event.key.toLowerCase()];
  if (verdict) void submit(verdict);
});

void pump();
void refreshDashboard();
window.setInterval(() => void pump(), 1500);
window.setInterval(() => void refreshDashboard(), 1000);
