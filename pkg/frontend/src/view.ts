import { renderChart } from './charts';
import type { EstimatesResponse, QueryPayload } from './types';

/** DOM glue: renders the query card, estimate charts, progress, and error
 * banners into fixed mount points in index.html. */

const UPSCALE = 4;

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing mount point #${id}`);
  return node;
}

export function renderQuery(
  query: QueryPayload | null,
  onAnswer: (label: 0 | 1) => void,
  onSkip: () => void,
): void {
  const mount = el('query');
  mount.innerHTML = '';
  if (query === null) {
    mount.innerHTML = '<p class="done">Session complete. Estimates below are final.</p>';
    return;
  }

  const card = document.createElement('div');
  card.className = 'query-card';

  const prompt = document.createElement('p');
  prompt.className = 'prompt';
  if (query.kind === 'precision-sample') {
    prompt.textContent = 'Is this a real object?';
  } else {
    prompt.textContent =
      `Does this patch contain an object? (blend of ${query.pool_size} image regions)`;
  }
  card.appendChild(prompt);

  const img = document.createElement('img');
  img.alt = query.kind;
  img.className = 'patch';
  // Low-res patches: upscale with nearest-neighbor so pixels stay crisp.
  img.style.imageRendering = 'pixelated';
  img.onload = () => {
    img.width = img.naturalWidth * UPSCALE;
    img.height = img.naturalHeight * UPSCALE;
  };
  img.onerror = () => {
    showError('Could not decode the query image.', false);
    const skip = document.createElement('button');
    skip.textContent = 'Skip';
    skip.onclick = onSkip;
    card.appendChild(skip);
  };
  img.src = `data:image/png;base64,${query.image_png_b64}`;
  card.appendChild(img);

  const buttons = document.createElement('div');
  buttons.className = 'buttons';
  const yes = document.createElement('button');
  yes.textContent = 'Yes (y)';
  yes.className = 'yes';
  yes.onclick = () => onAnswer(1);
  const no = document.createElement('button');
  no.textContent = 'No (n)';
  no.className = 'no';
  no.onclick = () => onAnswer(0);
  buttons.append(yes, no);
  card.appendChild(buttons);

  const prog = query.progress;
  const counter = document.createElement('p');
  counter.className = 'progress';
  counter.textContent =
    `gamma ${query.gamma}: ${prog.precision_answered}/${prog.precision_total} patches, ` +
    `${prog.pools_answered} pools (${prog.positives}/${prog.target_positives} positives)`;
  card.appendChild(counter);

  mount.appendChild(card);
}

export function renderEstimates(estimates: EstimatesResponse): void {
  const mount = el('estimates');
  const badges = estimates.progress
    .map(
      (g) =>
        `<span class="badge ${g.complete ? 'complete' : 'running'}">` +
        `gamma ${g.gamma}: ${g.complete ? 'done' : `${g.precision_answered}/${g.precision_total}`}` +
        '</span>',
    )
    .join(' ');
  mount.innerHTML =
    `<div class="badges">${badges}</div>` +
    renderChart(estimates.records, 'p_hat', 'Precision estimate vs gamma') +
    renderChart(estimates.records, 'recall_hat', 'Recall estimate vs gamma');
}

export function showError(message: string, retryable: boolean): void {
  const banner = el('banner');
  banner.textContent = retryable ? `${message} - will retry on next action` : message;
  banner.classList.remove('hidden');
}

export function clearError(): void {
  el('banner').classList.add('hidden');
}

export function bindKeyboard(onAnswer: (label: 0 | 1) => void): void {
  document.addEventListener('keydown', (ev) => {
    if (ev.target instanceof HTMLInputElement) return;
    if (ev.key === 'y') onAnswer(1);
    if (ev.key === 'n') onAnswer(0);
  });
}
