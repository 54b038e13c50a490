import sys
x = 2
if x == 2:
    sys.exit(0)
print('unreached')
