"""Calibration scratchpad (not part of the package)."""
import sys
import time
import numpy as np
import fadefree as ff
from fadefree.pipeline import simulate_frame, receive_frame, equalize_frame, detect_frame, DetectorSpec
from fadefree.whiten import fit_noise_whitener
from fadefree.equalize import residual_noise


def probe(cfg, label, l_values=(8, 15, 23, 31, 47, 63)):
    t0 = time.time()
    frame, rx = simulate_frame(cfg, 0)
    z = receive_frame(cfg, frame, rx)
    x, eqs = equalize_frame(cfg, frame, z)
    noise = residual_noise(x, frame.training)
    corr = np.corrcoef(x[:frame.n_training], frame.training.astype(float))[0, 1]
    print(f'--- {label}: train corr {corr:.4f}, resid var {np.var(noise):.5f}, '
          f'last mse {[f"{m:.4f}" for m in eqs[list(eqs)[-1]].mse_per_epoch_[-2:]]}')
    sig2 = {}
    for L in l_values:
        try:
            sig2[L] = fit_noise_whitener(noise, L).sigma2
        except Exception:
            sig2[L] = float('nan')
    print('   sigma2(L): ', {k: f'{v:.5f}' for k, v in sig2.items()},
          f'  gain15->31 {10*np.log10(sig2[15]/sig2[31]):.2f} dB,'
          f' 31->47 {10*np.log10(sig2[31]/sig2[47]):.2f} dB')
    for det in cfg.detectors:
        spec = DetectorSpec.parse(det)
        dec, run = detect_frame(cfg, spec, frame, x)
        errs = int(np.sum(dec != frame.payload))
        print(f'   {det:14s} errors {errs:5d}/{frame.n_payload}  '
              f'ber {errs/frame.n_payload:.2e}  ({time.time()-t0:.1f}s cum)')


base = ff.PipelineConfig(
    n_training=4000, n_payload=20000,
    pnle_taps=(61, 21, 9), pnle_epochs=6, pnle_step=1e-3,
    dfe_ff_taps=21, dfe_fb_taps=15, dfe_epochs=6,
    detectors=('threshold', 'mlse@15', 'fixed:16@31', 'fixed:16@47'),
)

mode = sys.argv[1] if len(sys.argv) > 1 else 'a'

if mode == 'a':
    for snr in (17, 20, 23, 26):
        cfg = base.with_(channel=ff.ChannelConfig(snr_db=snr, front_end_bandwidth=2.0e9))
        probe(cfg, f'16GBd/100km/fe2.0GHz snr={snr}')
elif mode == 'b':
    for fe in (2.4e9, 1.8e9):
        for snr in (18, 22):
            cfg = base.with_(channel=ff.ChannelConfig(snr_db=snr, front_end_bandwidth=fe))
            probe(cfg, f'16GBd/100km/fe{fe/1e9}GHz snr={snr}')
elif mode == 'c':
    # 32 GBd: nulls at 6.06, 10.5, 13.5 GHz in a 16 GHz band
    for snr in (16, 20, 24):
        cfg = base.with_(symbol_rate=32e9,
                         channel=ff.ChannelConfig(snr_db=snr, front_end_bandwidth=4.0e9))
        probe(cfg, f'32GBd/100km/fe4GHz snr={snr}')
